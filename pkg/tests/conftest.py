"""Shared builders for the test suite: graphs, hand-built transition
systems, reference evaluators, and a batched integrator for validation
sweeps."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from mas.abstraction import AgentWTS
from mas.graph import build_graph


# --------------------------------------------------------------------------
# graphs
# --------------------------------------------------------------------------

def path_graph(agent_count: int, dimension: int = 1):
    edges = [(i, i + 1) for i in range(1, agent_count)]
    return build_graph(agent_count, edges, dimension)


def random_connected_graph(rng: np.random.Generator, max_agents: int = 6,
                           max_dimension: int = 3):
    """Random connected graph: a random spanning tree plus random extras."""
    n = int(rng.integers(2, max_agents + 1))
    dim = int(rng.integers(1, max_dimension + 1))
    edges = set()
    nodes = list(rng.permutation(np.arange(1, n + 1)))
    for k in range(1, len(nodes)):
        a = int(nodes[int(rng.integers(0, k))])
        b = int(nodes[k])
        edges.add((min(a, b), max(a, b)))
    extras = int(rng.integers(0, n))
    for _ in range(extras):
        a, b = rng.choice(np.arange(1, n + 1), size=2, replace=False)
        edges.add((min(int(a), int(b)), max(int(a), int(b))))
    return build_graph(n, sorted(edges), dim)


# --------------------------------------------------------------------------
# hand-built transition systems
# --------------------------------------------------------------------------

def granted_chain_wts(agent, chain, labels, neighbors, all_cells, dt):
    """WTS that grants chain progression plus staying, under every
    combination of neighbor cells (the fully-granted transition table used
    by the planning examples)."""
    cells = tuple(sorted(all_cells))
    table: dict[tuple[int, ...], set[int]] = {}
    for ci, cell in enumerate(chain):
        targets = [chain[ci + 1]] if ci + 1 < len(chain) else []
        targets.append(cell)  # staying is always granted
        for nbr_cells in itertools.product(cells, repeat=len(neighbors)):
            key = (cell,) + tuple(nbr_cells)
            table.setdefault(key, set()).update(targets)
    return AgentWTS(
        agent=agent, cells=cells, initial=chain[0], dt=dt,
        labels={c: frozenset(l) for c, l in labels.items()},
        transitions={k: tuple(sorted(v)) for k, v in table.items()},
        neighbor_agents=tuple(neighbors))


def four_state_timed_wts(dt: float = 1.0) -> AgentWTS:
    """Three-cell system with non-uniform durations and one green cell.

    s0 -1.0-> s1, s1 -2.0-> s0, s1 -1.5-> s2, s2 -0.5-> s1; L(s0)={green}.
    Cells are numbered 0, 1, 2 and the agent has no neighbors.
    """
    transitions = {(0,): (1,), (1,): (0, 2), (2,): (1,)}
    durations = {
        (0, (0,), 1): 1.0,
        (1, (1,), 0): 2.0,
        (1, (1,), 2): 1.5,
        (2, (2,), 1): 0.5,
    }
    return AgentWTS(
        agent=1, cells=(0, 1, 2), initial=0, dt=dt,
        labels={0: frozenset({"green"})},
        transitions=transitions, durations=durations)


def planning_example(dt):
    """Three agents on a star graph with fully-granted 4-cell chains.

    Agent 1 walks 14-17-10-20 toward a yellow cell, agent 2 walks
    28-27-24-22 through a red cell, agent 3 walks 2-13-5-9 toward a blue
    cell; goals are F[0,6] yellow, F[3,10] red and F[3,9] blue.
    Returns (wts_list, graph, formulas).
    """
    from mas.mitl import parse

    g = build_graph(3, [(1, 2), (1, 3)])
    cells = tuple(range(1, 31))
    w1 = granted_chain_wts(1, (14, 17, 10, 20), {20: {"yellow"}}, (2, 3),
                           cells, dt)
    w2 = granted_chain_wts(2, (28, 27, 24, 22), {24: {"red"}}, (1,),
                           cells, dt)
    w3 = granted_chain_wts(3, (2, 13, 5, 9), {9: {"blue"}}, (1,), cells, dt)
    formulas = {1: parse("F[0,6] yellow"), 2: parse("F[3,10] red"),
                3: parse("F[3,9] blue")}
    return [w1, w2, w3], g, formulas


# --------------------------------------------------------------------------
# reference semantics (independent of mas.mitl internals)
# --------------------------------------------------------------------------

def reference_eval(letters, times, formula, position=0):
    """Textbook pointwise semantics over an explicitly unrolled finite slice.

    ``letters``/``times`` must be unrolled far enough that every temporal
    window the check touches is fully inside the slice; the helpers below
    only use it on short formulas over generously unrolled lassos.
    """
    from mas import mitl

    f = formula
    if isinstance(f, mitl.Atom):
        return f.name in letters[position]
    if isinstance(f, mitl.Not):
        return not reference_eval(letters, times, f.arg, position)
    if isinstance(f, mitl.And):
        return (reference_eval(letters, times, f.left, position)
                and reference_eval(letters, times, f.right, position))
    base = times[position]

    def in_window(j):
        return f.interval.contains(times[j] - base)

    def beyond(j):
        rel = times[j] - base
        hi = f.interval.hi
        return hi is not None and (rel > hi or (f.interval.hi_open and rel == hi))

    if isinstance(f, mitl.Next):
        j = position + 1
        return (j < len(letters) and in_window(j)
                and reference_eval(letters, times, f.arg, j))
    if isinstance(f, mitl.Eventually):
        for j in range(position, len(letters)):
            if beyond(j):
                return False
            if in_window(j) and reference_eval(letters, times, f.arg, j):
                return True
        raise AssertionError("slice too short for reference evaluation")
    if isinstance(f, mitl.Always):
        for j in range(position, len(letters)):
            if beyond(j):
                return True
            if in_window(j) and not reference_eval(letters, times, f.arg, j):
                return False
        raise AssertionError("slice too short for reference evaluation")
    if isinstance(f, mitl.Until):
        for j in range(position, len(letters)):
            if beyond(j):
                return False
            if in_window(j) and reference_eval(letters, times, f.right, j):
                return True
            if not reference_eval(letters, times, f.left, j):
                return False
        raise AssertionError("slice too short for reference evaluation")
    raise TypeError(f"unknown formula node {type(f).__name__}")


def unroll(word, count):
    """First ``count`` (letter, absolute time) pairs of an eventually
    periodic timed word."""
    letters, times = [], []
    for j in range(count):
        letters.append(word.letter(j))
        times.append(word.time(j))
    return letters, times


# --------------------------------------------------------------------------
# random flat formulas and lasso words
# --------------------------------------------------------------------------

def random_flat_formula(rng: np.random.Generator, names=("p", "q"),
                        max_constant: int = 5):
    """Random member of the translatable fragment: a conjunction of F/G/U/X
    units with integer window endpoints and propositional operands."""
    from mas import mitl

    def literal():
        atom = mitl.Atom(str(rng.choice(names)))
        if rng.random() < 0.3:
            return mitl.Not(atom)
        if rng.random() < 0.2:
            other = mitl.Atom(str(rng.choice(names)))
            return mitl.And(atom, other)
        return atom

    def interval():
        lo = int(rng.integers(0, max_constant))
        if rng.random() < 0.15:
            hi, hi_open = None, True
        else:
            hi = int(rng.integers(lo + 1, max_constant + 1))
            hi_open = bool(rng.random() < 0.25)
        return mitl.Interval(Fraction(lo), None if hi is None else Fraction(hi),
                             lo_open=bool(rng.random() < 0.25),
                             hi_open=hi_open)

    def unit():
        kind = rng.choice(["F", "G", "U", "X"])
        iv = interval()
        if kind == "F":
            out = mitl.Eventually(iv, literal())
        elif kind == "G":
            out = mitl.Always(iv, literal())
        elif kind == "X":
            out = mitl.Next(iv, literal())
        else:
            out = mitl.Until(iv, literal(), literal())
        if kind in ("F", "G") and rng.random() < 0.2:
            out = mitl.Not(out)  # exercised via duality
        return out

    formula = unit()
    if rng.random() < 0.35:
        formula = mitl.And(formula, unit())
    return formula


def random_lasso_word(rng: np.random.Generator, names=("p", "q"),
                      max_length: int = 12, dt=1):
    """Random ultimately periodic word, total length <= max_length."""
    from mas import mitl

    letters = [frozenset(n for n in names if rng.random() < 0.4)
               for _ in range(max_length)]
    cycle_len = int(rng.integers(1, max_length + 1))
    prefix_len = int(rng.integers(0, max_length - cycle_len + 1))
    return mitl.word_from_lasso(letters[:prefix_len],
                                letters[prefix_len:prefix_len + cycle_len], dt)


# --------------------------------------------------------------------------
# batched integration (validation sweeps)
# --------------------------------------------------------------------------

def batched_rk4(g, starts: np.ndarray, inputs: np.ndarray, dt: float,
                substeps: int = 8) -> np.ndarray:
    """Integrate many consensus trajectories at once over one interval.

    ``starts``/``inputs`` have shape (batch, agents, dimension); the input is
    held constant over the interval. Returns the batch of endpoint states.
    """
    from mas.graph import spectral

    lap = spectral(g).laplacian
    h = dt / substeps

    def f(x):
        return -np.einsum("ij,bjk->bik", lap, x) + inputs

    x = starts.astype(float).copy()
    for _ in range(substeps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


# --------------------------------------------------------------------------
# misc
# --------------------------------------------------------------------------

@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def fraction(x) -> Fraction:
    return Fraction(str(x)) if isinstance(x, float) else Fraction(x)
