"""Joint plan synthesis: automata products, lasso search, run alignment.

The planner works in stages:

1. translate each agent's formula into a timed Büchi automaton over the
   agent's service alphabet;
2. build each agent's (transition system x automaton) product and enumerate
   candidate accepting lassos, cheapest first;
3. try combinations of per-agent lassos (lexicographically, up to an
   iteration budget): align them to a common prefix/period and keep the first
   combination whose joint behavior every agent's transition table allows;
4. if that fails, search the full product of all agents against the
   intersection of all automata with a nested depth-first search - absence of
   an accepting lasso there proves unsatisfiability;
5. package the joint run as per-agent plans with timestamps, actions and the
   abstraction's transition certificates.

Product states are (system state, automaton location, clock valuation); time
advances by each transition's duration, guards are evaluated at the
post-delay values, and clocks saturate above the automaton's largest
constant. A product state is only formed when the system state's service set
equals the automaton location's letter.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

from . import _ndfs
from .abstraction import AgentWTS, ProductWTS, TransitionCertificate, build_product
from .errors import LengthMismatch, Unsatisfiable
from .graph import NetworkGraph
from .mitl import (Eventually, MitlFormula, TimedWord, atoms, evaluate,
                   formula_to_text, to_fraction, word_from_lasso)
from .tba import ClockValuation, TimedAutomaton, from_flat_mitl, intersect

logger = logging.getLogger(__name__)

DEFAULT_R_ITER = 10**4
DEFAULT_LCM_CAP = 10**3
DEFAULT_STATE_CAP = 10**6


@dataclass(frozen=True)
class Lasso:
    """Ultimately periodic run fragment (see _ndfs for the conventions)."""

    prefix_states: tuple
    prefix_actions: tuple
    cycle_states: tuple
    cycle_actions: tuple

    def state_at(self, position: int):
        p = len(self.prefix_states)
        if position < p:
            return self.prefix_states[position]
        return self.cycle_states[(position - p) % len(self.cycle_states)]


class _ValKey:
    """Interned clock-valuation tuple with a cached hash.

    Product states are hashed millions of times during lasso search; exact
    rational clock values make every re-hash expensive. Each distinct
    valuation is wrapped once per product, so hashing is a cached-int lookup
    and equality short-circuits on identity.
    """

    __slots__ = ("values", "_h")

    def __init__(self, values: tuple):
        self.values = values
        self._h = hash(values)

    def __hash__(self) -> int:
        return self._h

    def __eq__(self, other) -> bool:
        return self is other or (isinstance(other, _ValKey)
                                 and self.values == other.values)

    def __repr__(self) -> str:
        return f"_ValKey{self.values!r}"


class BuchiProduct:
    """Lazy product of a transition system with a timed Büchi automaton."""

    def __init__(self, system, automaton: TimedAutomaton):
        self.system = system
        self.automaton = automaton
        self.c_max = automaton.c_max
        self._succ_cache: dict[tuple, list] = {}
        self._keys: dict[tuple, _ValKey] = {}
        # valuation transforms repeat constantly; memoise per distinct input
        self._advance_memo: dict = {}   # (vkey, duration) -> (vkey', map')
        self._reset_memo: dict = {}     # (vkey, resets) -> (vkey', map')
        self._inv_memo: dict = {}       # (location, vkey) -> bool
        self._guard_memo: dict = {}     # (location, edge index, vkey) -> bool

    def _intern(self, values: tuple) -> _ValKey:
        key = self._keys.get(values)
        if key is None:
            key = _ValKey(values)
            self._keys[values] = key
        return key

    def _advanced(self, vkey: _ValKey, duration) -> tuple:
        entry = self._advance_memo.get((vkey, duration))
        if entry is None:
            before = ClockValuation(self.automaton.clocks, vkey.values)
            moved = before.advance(to_fraction(duration), self.c_max)
            entry = (self._intern(moved.values), moved.as_dict())
            self._advance_memo[(vkey, duration)] = entry
        return entry

    def _landed(self, vkey: _ValKey, vmap: dict, resets: frozenset) -> tuple:
        if not resets:
            return vkey, vmap
        entry = self._reset_memo.get((vkey, resets))
        if entry is None:
            moved = ClockValuation(self.automaton.clocks, vkey.values)
            landed = moved.reset(resets)
            entry = (self._intern(landed.values), landed.as_dict())
            self._reset_memo[(vkey, resets)] = entry
        return entry

    def _invariant_ok(self, q, vkey: _ValKey, vmap: dict) -> bool:
        got = self._inv_memo.get((q, vkey))
        if got is None:
            got = self.automaton.invariants[q].satisfied(vmap)
            self._inv_memo[(q, vkey)] = got
        return got

    def initial(self) -> list[tuple]:
        zero = ClockValuation.zero(self.automaton.clocks)
        zero_key = self._intern(zero.values)
        zero_map = zero.as_dict()
        out = []
        for s in self.system.initial_states():
            for q in self.automaton.initial:
                if self.automaton.labels[q] != self.system.label(s):
                    continue
                if not self._invariant_ok(q, zero_key, zero_map):
                    continue
                out.append((s, q, zero_key))
        return out

    def successors(self, state: tuple) -> list[tuple]:
        cached = self._succ_cache.get(state)
        if cached is not None:
            return cached
        s, q, vkey = state
        result = []
        for action, s2, duration in self.system.successors(s):
            moved_key, moved_map = self._advanced(vkey, duration)
            if not self._invariant_ok(q, moved_key, moved_map):
                continue
            target_label = self.system.label(s2)
            for i, edge in enumerate(self.automaton.edges_from[q]):
                if self.automaton.labels[edge.target] != target_label:
                    continue
                guard_ok = self._guard_memo.get((q, i, moved_key))
                if guard_ok is None:
                    guard_ok = edge.guard.satisfied(moved_map)
                    self._guard_memo[(q, i, moved_key)] = guard_ok
                if not guard_ok:
                    continue
                landed_key, landed_map = self._landed(
                    moved_key, moved_map, edge.resets)
                if not self._invariant_ok(edge.target, landed_key, landed_map):
                    continue
                result.append(((action, s2), (s2, edge.target, landed_key)))
        self._succ_cache[state] = result
        return result

    def accepting(self, state: tuple) -> bool:
        return state[1] in self.automaton.accepting


def buchi_product(system, automaton: TimedAutomaton) -> BuchiProduct:
    """Product of an agent/product transition system with an automaton."""
    return BuchiProduct(system, automaton)


def find_accepting_lasso(product: BuchiProduct,
                         max_states: int = DEFAULT_STATE_CAP) -> Lasso | None:
    """Nested-DFS emptiness check; returns the first accepting lasso found."""
    raw = _ndfs.find_accepting_cycle(
        product.initial(), product.successors, product.accepting,
        max_states=max_states)
    if raw is None:
        return None
    return Lasso(raw.prefix_states, raw.prefix_actions,
                 raw.cycle_states, raw.cycle_actions)


def enumerate_accepting_lassos(product: BuchiProduct,
                               max_states: int = DEFAULT_STATE_CAP) -> list[Lasso]:
    """Canonical accepting lassos, one per accepting state, cheapest first."""
    raws = _ndfs.shortest_lassos(
        product.initial(), product.successors, product.accepting,
        max_states=max_states,
        priority=lambda state: not product.accepting(state))
    return [Lasso(r.prefix_states, r.prefix_actions,
                  r.cycle_states, r.cycle_actions) for r in raws]


# --------------------------------------------------------------------------
# run alignment and consistency
# --------------------------------------------------------------------------

class _CellView:
    """Per-agent transition system quotiented over neighbor assumptions.

    For candidate-run enumeration only the agent's own cell sequence matters
    (consistency later re-derives the action from the joint state), so
    distinct actions reaching the same target collapse into one edge. This
    keeps per-agent products small for high-degree agents.

    Successors are ordered movement-first (self-loops last): among the many
    equal-length stems to an accepting state, breadth-first discovery then
    records a run that makes progress and provides its services at the
    earliest opportunity instead of idling until a deadline.
    """

    def __init__(self, wts: AgentWTS):
        self.wts = wts
        self._succ: dict[int, dict[int, float]] = {}

    def initial_states(self):
        return self.wts.initial_states()

    def label(self, cell: int) -> frozenset[str]:
        return self.wts.label(cell)

    def successors(self, cell: int):
        found = self._succ.get(cell)
        if found is None:
            found = {}
            for _, target, duration in self.wts.successors(cell):
                found.setdefault(target, duration)
            self._succ[cell] = found
        for target in sorted(found, key=lambda t: (t == cell, t)):
            yield None, target, found[target]


def _cell_at(prefix: tuple, cycle: tuple, position: int):
    p = len(prefix)
    if position < p:
        return prefix[position]
    return cycle[(position - p) % len(cycle)]


def align_runs(runs: list[tuple[tuple, tuple]],
               lcm_cap: int = DEFAULT_LCM_CAP) -> list[tuple[tuple, tuple]]:
    """Reslice per-agent (prefix, cycle) runs to a common prefix and period.

    The common prefix is the longest individual prefix; the common period is
    the least common multiple of the cycle lengths, which must stay within
    the alignment budget (LengthMismatch otherwise).
    """
    p_star = max(len(prefix) for prefix, _ in runs)
    c_star = math.lcm(*(len(cycle) for _, cycle in runs))
    if c_star > lcm_cap:
        raise LengthMismatch(
            f"aligned period {c_star} exceeds the budget {lcm_cap}")
    out = []
    for prefix, cycle in runs:
        new_prefix = tuple(_cell_at(prefix, cycle, j) for j in range(p_star))
        new_cycle = tuple(_cell_at(prefix, cycle, p_star + k)
                          for k in range(c_star))
        out.append((new_prefix, new_cycle))
    return out


def consistent(runs: list[tuple[tuple, tuple]], product: ProductWTS,
               lcm_cap: int = DEFAULT_LCM_CAP) -> bool:
    """Whether per-agent runs can be executed jointly.

    After alignment, every step's joint move must be allowed by every agent's
    transition table under the action derived from the joint state.
    """
    aligned = align_runs(runs, lcm_cap)
    p_star = len(aligned[0][0])
    c_star = len(aligned[0][1])
    for j in range(p_star + c_star):
        joint = tuple(_cell_at(prefix, cycle, j) for prefix, cycle in aligned)
        joint_next = tuple(_cell_at(prefix, cycle, j + 1)
                           for prefix, cycle in aligned)
        for w in product.wts_list:
            action = product.agent_action(joint, w.agent)
            if joint_next[w.agent - 1] not in w.transitions.get(action, ()):
                return False
    return True


# --------------------------------------------------------------------------
# plans
# --------------------------------------------------------------------------

@dataclass(eq=False)
class Plan:
    """One agent's executable timed plan.

    Cell at position j is prefix[j] for j < len(prefix), then the cycle
    repeats; position j is occupied from time j*dt. Actions/certificates/
    provided sets are per step (certificates are None for hand-built
    transition tables with no geometric origin).
    """

    agent: int
    dt: float
    prefix_cells: tuple[int, ...]
    cycle_cells: tuple[int, ...]
    prefix_actions: tuple[tuple[int, ...], ...]
    cycle_actions: tuple[tuple[int, ...], ...]
    provided_prefix: tuple[frozenset[str], ...]
    provided_cycle: tuple[frozenset[str], ...]
    certificates_prefix: tuple[TransitionCertificate | None, ...]
    certificates_cycle: tuple[TransitionCertificate | None, ...]
    formula_text: str = ""
    witness_time: Fraction | None = None

    def cell_at(self, position: int) -> int:
        return _cell_at(self.prefix_cells, self.cycle_cells, position)

    def action_at(self, position: int) -> tuple[int, ...]:
        return _cell_at(self.prefix_actions, self.cycle_actions, position)

    def certificate_at(self, position: int):
        return _cell_at(self.certificates_prefix, self.certificates_cycle,
                        position)

    def provided_at(self, position: int) -> frozenset[str]:
        return _cell_at(self.provided_prefix, self.provided_cycle, position)

    def timestamp(self, position: int) -> float:
        return position * self.dt

    def word(self) -> TimedWord:
        return word_from_lasso(self.provided_prefix, self.provided_cycle,
                               self.dt)

    @property
    def prefix_length(self) -> int:
        return len(self.prefix_cells)

    @property
    def cycle_length(self) -> int:
        return len(self.cycle_cells)


@dataclass(eq=False)
class SynthesisResult:
    plans: list[Plan]
    step_used: int  # 3 = per-agent combination, 4 = full product search
    agent_lasso_counts: list[int]
    combinations_tried: int
    product_states_explored: int | None = None


def witness_instant(word: TimedWord, formula: MitlFormula) -> Fraction | None:
    """First in-window time witnessing a top-level eventually-goal.

    Returns None for formulas that are not a top-level eventually, and for
    unsatisfied ones. For unbounded windows the scan stops once every cycle
    phase has been visited at an in-window position.
    """
    if not isinstance(formula, Eventually):
        return None
    interval = formula.interval
    base = word.time(0)
    opened_at: int | None = None
    j = 0
    while True:
        gap = word.time(j) - base
        if interval.beyond_upper(gap):
            return None
        if interval.contains(gap):
            if evaluate(word, formula.arg, j):
                return word.time(j)
            if opened_at is None:
                opened_at = j
        if opened_at is not None and \
                j >= max(opened_at, word.prefix_length) + word.cycle_length:
            return None
        j += 1


def _project_cells(lasso: Lasso, agent_index: int | None):
    """Cell sequences from product-state lassos (joint or per-agent)."""
    def cell(state):
        s = state[0]
        if agent_index is None:
            return s
        return s[agent_index]
    return (tuple(cell(s) for s in lasso.prefix_states),
            tuple(cell(s) for s in lasso.cycle_states))


def _build_plans(
    aligned: list[tuple[tuple, tuple]],
    wts_list: list[AgentWTS],
    product: ProductWTS,
    formulas: dict[int, MitlFormula],
    dt: float,
) -> list[Plan]:
    p_star = len(aligned[0][0])
    c_star = len(aligned[0][1])
    plans = []
    for idx, w in enumerate(wts_list):
        prefix, cycle = aligned[idx]
        actions, certs = [], []
        for j in range(p_star + c_star):
            joint = tuple(_cell_at(pre, cyc, j) for pre, cyc in aligned)
            action = product.agent_action(joint, w.agent)
            source = prefix[j] if j < p_star else cycle[(j - p_star) % c_star]
            target = _cell_at(prefix, cycle, j + 1)
            actions.append(action)
            certs.append(w.certificate(source, action, target))
        provided = [w.label(_cell_at(prefix, cycle, j))
                    for j in range(p_star + c_star)]
        formula = formulas[w.agent]
        plan = Plan(
            agent=w.agent,
            dt=dt,
            prefix_cells=prefix,
            cycle_cells=cycle,
            prefix_actions=tuple(actions[:p_star]),
            cycle_actions=tuple(actions[p_star:]),
            provided_prefix=tuple(provided[:p_star]),
            provided_cycle=tuple(provided[p_star:]),
            certificates_prefix=tuple(certs[:p_star]),
            certificates_cycle=tuple(certs[p_star:]),
            formula_text=formula_to_text(formula),
        )
        word = plan.word()
        satisfied = evaluate(word, formula)
        if not satisfied:
            raise AssertionError(
                f"internal error: synthesized plan for agent {w.agent} does "
                f"not satisfy its goal")
        plan.witness_time = witness_instant(word, formula)
        plans.append(plan)
    return plans


def synthesize(
    wts_list: list[AgentWTS],
    g: NetworkGraph,
    formulas: dict[int, MitlFormula],
    alphabets: dict[int, frozenset[str]] | None = None,
    r_iter: int = DEFAULT_R_ITER,
    max_states: int = DEFAULT_STATE_CAP,
    lcm_cap: int = DEFAULT_LCM_CAP,
) -> SynthesisResult:
    """Synthesize consistent per-agent plans satisfying every agent's formula.

    Raises Unsatisfiable when the exhaustive product search proves there is
    no accepting joint run; BudgetExceeded when a cap stopped the search
    before it could conclude either way.
    """
    if sorted(formulas) != [w.agent for w in wts_list]:
        raise ValueError("need exactly one formula per agent")
    dt = wts_list[0].dt
    automata: dict[int, TimedAutomaton] = {}
    for w in wts_list:
        sigma = atoms(formulas[w.agent])
        sigma |= frozenset().union(*w.labels.values()) if w.labels else frozenset()
        if alphabets and w.agent in alphabets:
            sigma |= alphabets[w.agent]
        automata[w.agent] = from_flat_mitl(formulas[w.agent], sigma)
    product = build_product(wts_list, g, state_cap=max_states)

    per_agent: list[list[Lasso]] = []
    for w in wts_list:
        bp = BuchiProduct(_CellView(w), automata[w.agent])
        lassos = enumerate_accepting_lassos(bp, max_states=max_states)
        logger.info("agent %d: %d candidate accepting lassos", w.agent,
                    len(lassos))
        per_agent.append(lassos)

    combos_tried = 0
    if all(per_agent):
        for combo in itertools.product(*per_agent):
            combos_tried += 1
            if combos_tried > r_iter:
                logger.info("combination budget %d exhausted", r_iter)
                break
            runs = [_project_cells(lasso, None) for lasso in combo]
            try:
                ok = consistent(runs, product, lcm_cap)
            except LengthMismatch:
                continue
            if ok:
                aligned = align_runs(runs, lcm_cap)
                plans = _build_plans(aligned, wts_list, product, formulas, dt)
                return SynthesisResult(
                    plans=plans, step_used=3,
                    agent_lasso_counts=[len(ls) for ls in per_agent],
                    combinations_tried=combos_tried)

    logger.info("falling back to the full product search")
    joint_automaton = reduce(intersect,
                             [automata[w.agent] for w in wts_list])
    bp = BuchiProduct(product, joint_automaton)
    lasso = find_accepting_lasso(bp, max_states=max_states)
    if lasso is None:
        raise Unsatisfiable(
            "exhaustive product search found no accepting joint run")
    joint_runs = [_project_cells(lasso, idx) for idx in range(len(wts_list))]
    if not consistent(joint_runs, product, lcm_cap):
        raise AssertionError(
            "internal error: product lasso projected to inconsistent runs")
    aligned = align_runs(joint_runs, lcm_cap)
    plans = _build_plans(aligned, wts_list, product, formulas, dt)
    return SynthesisResult(
        plans=plans, step_used=4,
        agent_lasso_counts=[len(ls) for ls in per_agent],
        combinations_tried=combos_tried)
