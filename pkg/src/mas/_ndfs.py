"""Nested depth-first search for accepting cycles, plus a BFS enumerator.

Works over implicit graphs: ``successors(state)`` yields (payload, child)
pairs in a fixed order, and determinism of the result follows from that
order. Payloads ride along so callers can rebuild edge labels (actions).

The lasso convention used throughout the package:

* ``prefix_states``  - states strictly before the loop (possibly empty),
* ``cycle_states``   - the loop, anchor first,
* ``prefix_actions`` - prefix_actions[i] labels prefix[i] -> next position,
* ``cycle_actions``  - cycle_actions[i] labels cycle[i] -> cycle[(i+1) % C].
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BudgetExceeded


@dataclass(frozen=True)
class RawLasso:
    prefix_states: tuple
    prefix_actions: tuple
    cycle_states: tuple
    cycle_actions: tuple


def _check_budget(count: int, max_states: int | None):
    if max_states is not None and count > max_states:
        raise BudgetExceeded(
            f"search explored more than {max_states} states")


def find_accepting_cycle(initials, successors, is_accepting,
                         max_states: int | None = None) -> RawLasso | None:
    """Classic two-color nested DFS (accepting-cycle emptiness check).

    The outer DFS explores in the order ``successors`` yields; when an
    accepting state is fully expanded, an inner DFS looks for a path back to
    the outer stack, which closes an accepting cycle. The first hit (in that
    deterministic order) is reconstructed and returned.
    """
    blue: set = set()
    red: set = set()

    for root in initials:
        if root in blue:
            continue
        blue.add(root)
        _check_budget(len(blue), max_states)
        # frames: (state, successor-iterator, payload that led here)
        frames = [(root, iter(successors(root)), None)]
        on_stack = {root: 0}
        while frames:
            state, it, _ = frames[-1]
            pushed = False
            for payload, child in it:
                if child not in blue:
                    blue.add(child)
                    _check_budget(len(blue), max_states)
                    frames.append((child, iter(successors(child)), payload))
                    on_stack[child] = len(frames) - 1
                    pushed = True
                    break
            if pushed:
                continue
            if is_accepting(state):
                hit = _red_search(state, successors, red, on_stack, max_states)
                if hit is not None:
                    return _reconstruct(frames, on_stack, hit)
            frames.pop()
            del on_stack[state]
    return None


def _red_search(seed, successors, red, on_stack, max_states):
    """Inner DFS; returns (anchor, red_states, red_payloads) on success.

    red_states lists the inner path seed -> .. -> anchor exclusive of both
    endpoints; red_payloads has one entry per edge along that path.
    """
    red.add(seed)
    _check_budget(len(red), max_states)
    stack = [(seed, iter(successors(seed)))]
    parents: dict = {}
    while stack:
        state, it = stack[-1]
        advanced = False
        for payload, child in it:
            if child in on_stack:
                states, payloads = [], [payload]
                walk = state
                while walk != seed:
                    parent, via = parents[walk]
                    states.append(walk)
                    payloads.append(via)
                    walk = parent
                states.reverse()
                payloads.reverse()
                return child, tuple(states), tuple(payloads)
            if child not in red:
                red.add(child)
                _check_budget(len(red), max_states)
                parents[child] = (state, payload)
                stack.append((child, iter(successors(child))))
                advanced = True
                break
        if not advanced:
            stack.pop()
    return None


def _reconstruct(frames, on_stack, hit) -> RawLasso:
    anchor, red_states, red_payloads = hit
    idx = on_stack[anchor]
    prefix_states = tuple(frames[i][0] for i in range(idx))
    prefix_actions = tuple(frames[i + 1][2] for i in range(idx))
    blue_states = tuple(frames[i][0] for i in range(idx, len(frames)))
    blue_payloads = tuple(frames[i][2] for i in range(idx + 1, len(frames)))
    cycle_states = blue_states + red_states
    cycle_actions = blue_payloads + red_payloads
    return RawLasso(prefix_states, prefix_actions, cycle_states, cycle_actions)


def shortest_lassos(initials, successors, is_accepting,
                    max_states: int | None = None,
                    priority=None) -> list[RawLasso]:
    """One canonical lasso per reachable accepting state.

    The stem is BFS-shortest from the initial set; the loop is BFS-shortest
    from the accepting state back to itself. Results are ordered by
    (stem length, loop length, discovery order), which makes downstream
    combination search deterministic.

    ``priority(state)`` (lower first, stable) orders expansion within each
    BFS layer. Ties between equal-length stems are then broken in favor of
    parent chains through low-priority states, e.g. passing a
    ``not is_accepting(state)`` priority records stems that reach accepting
    territory at the earliest possible depth.
    """
    parent: dict = {}
    order: list = []
    frontier = []
    for root in initials:
        if root not in parent:
            parent[root] = (None, None)
            frontier.append(root)
            order.append(root)
    _check_budget(len(parent), max_states)
    while frontier:
        if priority is not None:
            frontier.sort(key=priority)
        nxt = []
        for state in frontier:
            for payload, child in successors(state):
                if child not in parent:
                    parent[child] = (state, payload)
                    _check_budget(len(parent), max_states)
                    nxt.append(child)
                    order.append(child)
        frontier = nxt

    capable = _loop_capable(order, successors)
    found = []
    for disc, anchor in enumerate(order):
        if not is_accepting(anchor) or anchor not in capable:
            continue
        loop = _shortest_loop(anchor, successors, max_states)
        if loop is None:
            continue
        stem_states, stem_actions = [], []
        walk = anchor
        while True:
            prev, via = parent[walk]
            if prev is None:
                break
            stem_states.append(prev)
            stem_actions.append(via)
            walk = prev
        stem_states.reverse()
        stem_actions.reverse()
        loop_states, loop_actions = loop
        found.append((len(stem_states), len(loop_states), disc, RawLasso(
            tuple(stem_states), tuple(stem_actions),
            tuple(loop_states), tuple(loop_actions))))
    found.sort(key=lambda item: item[:3])
    return [item[3] for item in found]


def _loop_capable(states, successors) -> set:
    """States lying on some cycle: members of non-trivial SCCs or self-loops.

    Iterative Tarjan over the already-explored graph; pruning hopeless
    anchors keeps the per-accepting-state loop searches from sweeping the
    whole reachable set once per transient state.
    """
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    capable: set = set()
    counter = 0
    for root in states:
        if root in index:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(successors(root)))]
        while work:
            state, it = work[-1]
            advanced = False
            for _, child in it:
                if child not in index:
                    index[child] = low[child] = counter
                    counter += 1
                    stack.append(child)
                    on_stack.add(child)
                    work.append((child, iter(successors(child))))
                    advanced = True
                    break
                if child in on_stack:
                    low[state] = min(low[state], index[child])
            if advanced:
                continue
            work.pop()
            if work:
                above = work[-1][0]
                low[above] = min(low[above], low[state])
            if low[state] == index[state]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == state:
                        break
                if len(component) > 1:
                    capable.update(component)
                elif any(child == state
                         for _, child in successors(state)):
                    capable.add(state)
    return capable


def _shortest_loop(anchor, successors, max_states):
    """BFS-shortest non-empty path anchor -> anchor; None if no loop."""
    parent: dict = {}
    frontier = [anchor]
    closing = None
    while frontier and closing is None:
        nxt = []
        for state in frontier:
            for payload, child in successors(state):
                if child == anchor:
                    closing = (state, payload)
                    break
                if child not in parent:
                    parent[child] = (state, payload)
                    _check_budget(len(parent), max_states)
                    nxt.append(child)
            if closing is not None:
                break
        frontier = nxt
    if closing is None:
        return None
    last, closing_payload = closing
    states, payloads = [], [closing_payload]
    walk = last
    while walk != anchor:
        prev, via = parent[walk]
        states.append(walk)
        payloads.append(via)
        walk = prev
    states.reverse()
    payloads.reverse()
    return [anchor] + states, payloads
