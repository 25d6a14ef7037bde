"""Decentralized abstraction: per-agent transition systems over workspace cells.

Each agent's motion couples to its graph neighbors through the consensus
drift f_i(x) = -sum_{j in N(i)} (x_i - x_j). A cell-to-cell transition is
enabled when, for every corner of the source cell and every corner assignment
of the neighbors' cells, a bounded correction input can steer the sampled
prediction to the target cell's center, and the continuous flow cannot drift
out of the target by more than its inradius in one sampling period. The
certificate stores the center-to-center nominal input and that deviation
remainder, so transitions can be re-validated against the actual dynamics.

Actions are (own cell, neighbor cells...) tuples: what the agent plans to do
given where its neighbors currently are. The product system synchronizes all
agents cell-wise.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundsReport, DiscretizationRange, deviation_remainder
from .errors import ArityMismatch, BudgetExceeded
from .graph import NetworkGraph
from .partition import CellDecomposition, ServiceLabeling

logger = logging.getLogger(__name__)

ACTION_ENUMERATION_CAP = 10**7
PRODUCT_STATE_CAP = 10**6


def drift(g: NetworkGraph, agent: int, x_i, x_neighbors) -> np.ndarray:
    """Consensus drift of one agent given its neighbors' positions."""
    nbrs = g.neighbors(agent)
    xs = [np.asarray(x, dtype=float).reshape(-1) for x in x_neighbors]
    if len(xs) != len(nbrs):
        raise ArityMismatch(
            f"agent {agent} has {len(nbrs)} neighbors, got {len(xs)} positions")
    own = np.asarray(x_i, dtype=float).reshape(-1)
    out = np.zeros_like(own)
    for x in xs:
        out -= own - x
    return out


def drift_all(g: NetworkGraph, positions: np.ndarray) -> np.ndarray:
    """Stacked consensus drift for all agents; positions is (N, n)."""
    lap = np.zeros((g.agent_count, g.agent_count))
    for i, j in g.edges:
        lap[i - 1, i - 1] += 1.0
        lap[j - 1, j - 1] += 1.0
        lap[i - 1, j - 1] -= 1.0
        lap[j - 1, i - 1] -= 1.0
    return -lap @ positions


@dataclass(frozen=True, eq=False)
class TransitionCertificate:
    """Evidence that one cell transition is well-posed."""

    agent: int
    source: int
    target: int
    neighbor_cells: tuple[int, ...]
    nominal_input: np.ndarray  # center-to-center correction, norm <= lambda*v_max
    remainder: float           # continuous-flow deviation bound rho(dt)

    def nominal_norm(self) -> float:
        return float(np.linalg.norm(self.nominal_input))


@dataclass(eq=False)
class AgentWTS:
    """One agent's weighted transition system over cell indices.

    ``transitions`` maps an action tuple (own cell, neighbor cells...) to the
    tuple of targets enabled under it. Durations default to the uniform
    sampling period ``dt``; sparse overrides support hand-built systems with
    non-uniform weights.
    """

    agent: int
    cells: tuple[int, ...]
    initial: int
    dt: float
    labels: dict[int, frozenset[str]]
    transitions: dict[tuple[int, ...], tuple[int, ...]]
    neighbor_agents: tuple[int, ...] = ()
    certificates: dict[tuple, TransitionCertificate] | None = None
    durations: dict[tuple, float] | None = None
    _by_source: dict[int, list[tuple[int, ...]]] = field(default_factory=dict)

    def __post_init__(self):
        by_source: dict[int, list[tuple[int, ...]]] = {}
        for action in sorted(self.transitions):
            by_source.setdefault(action[0], []).append(action)
        self._by_source = by_source

    def post(self, source: int, action: tuple[int, ...]) -> tuple[int, ...]:
        if action[0] != source:
            raise ArityMismatch(
                f"action {action} does not start at cell {source}")
        return self.transitions.get(action, ())

    def label(self, cell: int) -> frozenset[str]:
        return self.labels.get(cell, frozenset())

    def initial_states(self) -> tuple[int, ...]:
        return (self.initial,)

    def duration(self, source: int, action, target: int) -> float:
        if self.durations:
            return self.durations.get((source, action, target), self.dt)
        return self.dt

    def successors(self, cell: int):
        """All (action, target, duration) triples leaving a cell."""
        for action in self._by_source.get(cell, ()):
            for target in self.transitions[action]:
                yield action, target, self.duration(cell, action, target)

    def transition_count(self) -> int:
        return sum(len(ts) for ts in self.transitions.values())

    def certificate(self, source: int, action, target: int):
        if self.certificates is None:
            return None
        return self.certificates.get((source, action, target))


def transition_enabled(
    g: NetworkGraph,
    decomp: CellDecomposition,
    bounds: BoundsReport,
    disc: DiscretizationRange,
    agent: int,
    source: int,
    neighbor_cells: tuple[int, ...],
    target: int,
) -> TransitionCertificate | None:
    """Certificate for one transition, or None when it is not well-posed.

    Checks every corner of the source cell against every corner assignment of
    the neighbor cells (the required correction is affine in all of them, so
    corners are the extreme cases), then bounds the continuous deviation by
    the remainder rho(dt) against the target's inradius.
    """
    nbrs = g.neighbors(agent)
    if len(neighbor_cells) != len(nbrs):
        raise ArityMismatch(
            f"agent {agent} has {len(nbrs)} neighbors, got cells {neighbor_cells}")
    dt = disc.chosen_dt
    budget = bounds.lambda_reach * bounds.v_max * dt
    target_center = decomp.center(target)
    own = decomp.vertices(source)
    nbr_vertices = [decomp.vertices(c) for c in neighbor_cells]
    worst = 0.0
    for own_corner in own:
        for assignment in itertools.product(*nbr_vertices) if nbr_vertices else [()]:
            f = drift(g, agent, own_corner, assignment)
            req = target_center - own_corner - dt * f
            worst = max(worst, float(np.linalg.norm(req)))
            if worst > budget:
                return None
    rho = deviation_remainder(bounds, dt)
    if rho > decomp.inradius(target):
        return None
    center_f = drift(g, agent, decomp.center(source),
                     [decomp.center(c) for c in neighbor_cells])
    nominal = (target_center - decomp.center(source) - dt * center_f) / dt
    return TransitionCertificate(
        agent=agent,
        source=source,
        target=target,
        neighbor_cells=tuple(neighbor_cells),
        nominal_input=nominal,
        remainder=rho,
    )


def build_agent_wts(
    g: NetworkGraph,
    agent: int,
    decomp: CellDecomposition,
    labeling: ServiceLabeling,
    bounds: BoundsReport,
    disc: DiscretizationRange,
    initial_cell: int,
    max_actions: int = ACTION_ENUMERATION_CAP,
) -> AgentWTS:
    """Enumerate all well-posed transitions of one agent.

    The action space is every (own cell, neighbor cells...) combination, so
    its size is cells^(deg+1); a cap guards against accidental blow-ups.
    """
    nbrs = g.neighbors(agent)
    cells = tuple(range(1, decomp.cell_count + 1))
    action_count = len(cells) ** (len(nbrs) + 1)
    if action_count > max_actions:
        raise BudgetExceeded(
            f"agent {agent} would need {action_count} actions (cap {max_actions})")
    dt = disc.chosen_dt
    budget = bounds.lambda_reach * bounds.v_max * dt
    rho = deviation_remainder(bounds, dt)

    centers = np.array([decomp.center(c) for c in cells])
    vertex_sets = np.stack([decomp.vertices(c) for c in cells])  # (T, 2^n, n)
    inradii = np.array([decomp.inradius(c) for c in cells])
    size_ok = rho <= inradii  # per-target remainder test

    # all corner assignments as an index grid: row b picks corner combo b
    corners = vertex_sets.shape[1]
    combo_idx = np.array(list(itertools.product(range(corners),
                                                repeat=len(nbrs) + 1)))
    slot_idx = np.arange(len(nbrs) + 1)[None, :]

    transitions: dict[tuple[int, ...], tuple[int, ...]] = {}
    certificates: dict[tuple, TransitionCertificate] = {}
    for source in cells:
        for nbr_cells in itertools.product(cells, repeat=len(nbrs)):
            stacked = vertex_sets[[source - 1] + [c - 1 for c in nbr_cells]]
            block = stacked[slot_idx, combo_idx, :]  # (B, deg+1, n)
            own_pts = block[:, 0, :]
            if len(nbrs):
                f = block[:, 1:, :].sum(axis=1) - len(nbrs) * own_pts
            else:
                f = np.zeros_like(own_pts)
            endpoints = own_pts + dt * f  # (B, n)
            dist = np.linalg.norm(centers[None, :, :] - endpoints[:, None, :],
                                  axis=2)  # (B, T)
            reachable = (dist.max(axis=0) <= budget) & size_ok
            targets = tuple(int(cells[k]) for k in np.nonzero(reachable)[0])
            if not targets:
                continue
            action = (source,) + tuple(int(c) for c in nbr_cells)
            transitions[action] = targets
            center_f = drift(g, agent, decomp.center(source),
                             [decomp.center(c) for c in nbr_cells])
            for target in targets:
                nominal = (centers[target - 1] - decomp.center(source)
                           - dt * center_f) / dt
                certificates[(source, action, target)] = TransitionCertificate(
                    agent=agent, source=source, target=target,
                    neighbor_cells=tuple(int(c) for c in nbr_cells),
                    nominal_input=nominal, remainder=rho)

    labels = {c: labeling.label(agent, c) for c in cells}
    wts = AgentWTS(
        agent=agent,
        cells=cells,
        initial=initial_cell,
        dt=dt,
        labels=labels,
        transitions=transitions,
        neighbor_agents=nbrs,
        certificates=certificates,
    )
    logger.info("agent %d abstraction: %d cells, %d actions, %d transitions",
                agent, len(cells), len(transitions), wts.transition_count())
    return wts


class ProductWTS:
    """Synchronized product of all agents' transition systems.

    A joint state is a tuple of cells; each agent moves by its action
    determined by the joint state (own cell + neighbors' cells), and all
    agents move simultaneously with the common sampling period. States are
    expanded lazily; ``reachable_size`` materializes under a cap.
    """

    def __init__(self, wts_list: list[AgentWTS], g: NetworkGraph,
                 state_cap: int = PRODUCT_STATE_CAP):
        if len(wts_list) != g.agent_count:
            raise ArityMismatch(
                f"{len(wts_list)} transition systems for {g.agent_count} agents")
        dts = {w.dt for w in wts_list}
        if len(dts) != 1:
            raise ArityMismatch(f"agents disagree on the sampling period: {dts}")
        self.wts_list = list(wts_list)
        self.graph = g
        self.dt = wts_list[0].dt
        self.state_cap = state_cap
        self._succ_cache: dict[tuple, list] = {}

    def initial_states(self) -> tuple[tuple[int, ...], ...]:
        return (tuple(w.initial for w in self.wts_list),)

    def agent_action(self, joint: tuple[int, ...], agent: int) -> tuple[int, ...]:
        """The action agent i executes in a joint state: own + neighbor cells."""
        own = joint[agent - 1]
        return (own,) + tuple(joint[j - 1] for j in self.graph.neighbors(agent))

    def label(self, joint: tuple[int, ...]) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for w, cell in zip(self.wts_list, joint):
            out |= w.label(cell)
        return out

    def successors(self, joint: tuple[int, ...]):
        """(action=None, joint target, dt) triples; empty if any agent is stuck."""
        cached = self._succ_cache.get(joint)
        if cached is not None:
            return cached
        per_agent = []
        for w in self.wts_list:
            action = self.agent_action(joint, w.agent)
            targets = w.transitions.get(action, ())
            if not targets:
                per_agent = None
                break
            per_agent.append(targets)
        if per_agent is None:
            result = []
        else:
            result = [(None, combo, self.dt)
                      for combo in itertools.product(*per_agent)]
        self._succ_cache[joint] = result
        return result

    def reachable_size(self) -> int:
        seen = set(self.initial_states())
        frontier = list(seen)
        while frontier:
            state = frontier.pop()
            for _, child, _ in self.successors(state):
                if child not in seen:
                    seen.add(child)
                    if len(seen) > self.state_cap:
                        raise BudgetExceeded(
                            f"product exceeded {self.state_cap} states")
                    frontier.append(child)
        return len(seen)


def build_product(wts_list: list[AgentWTS], g: NetworkGraph,
                  state_cap: int = PRODUCT_STATE_CAP) -> ProductWTS:
    """Product transition system over the given per-agent systems."""
    return ProductWTS(wts_list, g, state_cap)


def feedback_input(
    g: NetworkGraph,
    agent: int,
    positions: np.ndarray,
    target_center: np.ndarray,
    dt: float,
    v_max: float,
) -> tuple[np.ndarray, bool]:
    """Measured-state correction input for one sampling interval.

    Steers the sampled prediction from the agent's current position to the
    target cell center; clamped to the input bound (the flag reports whether
    clamping occurred, which a well-posed plan never triggers).
    """
    own = positions[agent - 1]
    nbr_positions = [positions[j - 1] for j in g.neighbors(agent)]
    f = drift(g, agent, own, nbr_positions)
    v = (np.asarray(target_center, dtype=float) - own) / dt - f
    norm = float(np.linalg.norm(v))
    if norm > v_max:
        return v * (v_max / norm), True
    return v, False
