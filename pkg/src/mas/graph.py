"""Communication graphs, stacked state vectors, and Laplacian spectra.

Agents are numbered 1..N in all public inputs and outputs. A stacked vector
lists agent 1's coordinates first, then agent 2's, and so on. Edges are
undirected; for the incidence matrix the lower-numbered endpoint is the tail,
so the relative state of edge {i, j} with i < j is x_i - x_j.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, DisconnectedGraph, DuplicateEdge, SelfLoop

CONNECTIVITY_TOL = 1e-9


@dataclass(frozen=True)
class NetworkGraph:
    """Connected undirected communication graph over agents 1..N."""

    agent_count: int
    dimension: int
    edges: tuple[tuple[int, int], ...]  # normalized (low, high), sorted

    @cached_property
    def _neighbors(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.agent_count)]
        for i, j in self.edges:
            nbrs[i - 1].append(j)
            nbrs[j - 1].append(i)
        return tuple(tuple(sorted(ns)) for ns in nbrs)

    def neighbors(self, agent: int) -> tuple[int, ...]:
        """Sorted neighbor ids of an agent (1-based)."""
        return self._neighbors[agent - 1]

    def degree(self, agent: int) -> int:
        return len(self.neighbors(agent))

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def incidence_matrix(g: NetworkGraph) -> np.ndarray:
    """N x E incidence matrix; +1 at the tail (lower id), -1 at the head."""
    d = np.zeros((g.agent_count, g.edge_count))
    for e, (i, j) in enumerate(g.edges):
        d[i - 1, e] = 1.0
        d[j - 1, e] = -1.0
    return d


def _laplacian(edges, agent_count) -> np.ndarray:
    lap = np.zeros((agent_count, agent_count))
    for i, j in edges:
        lap[i - 1, i - 1] += 1.0
        lap[j - 1, j - 1] += 1.0
        lap[i - 1, j - 1] -= 1.0
        lap[j - 1, i - 1] -= 1.0
    return lap


def build_graph(agent_count: int, edges, dimension: int = 1) -> NetworkGraph:
    """Validate and normalize a graph description.

    Raises SelfLoop / DuplicateEdge on malformed edge lists and
    DisconnectedGraph when the second Laplacian eigenvalue is below tolerance.
    """
    if agent_count < 2:
        raise ValueError(f"need at least 2 agents, got {agent_count}")
    if dimension < 1:
        raise ValueError(f"dimension must be positive, got {dimension}")
    normalized = []
    seen = set()
    for edge in edges:
        i, j = int(edge[0]), int(edge[1])
        if not (1 <= i <= agent_count and 1 <= j <= agent_count):
            raise ValueError(f"edge ({i},{j}) references an unknown agent")
        if i == j:
            raise SelfLoop(f"edge ({i},{j}) is a self-loop")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateEdge(f"edge {key} listed twice")
        seen.add(key)
        normalized.append(key)
    normalized.sort()
    lap = _laplacian(normalized, agent_count)
    eigvals = np.linalg.eigvalsh(lap)
    if eigvals[1] <= CONNECTIVITY_TOL:
        raise DisconnectedGraph(
            f"graph is disconnected (lambda_2 = {eigvals[1]:.3e})")
    return NetworkGraph(agent_count, dimension, tuple(normalized))


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Laplacian spectrum facts used by the reachability bounds."""

    laplacian: np.ndarray
    incidence: np.ndarray
    lambda2: float
    lambda_max: float
    incidence_transpose_norm: float  # spectral norm of D^T, = sqrt(lambda_max)


def spectral(g: NetworkGraph) -> SpectralData:
    """Compute the Laplacian, incidence matrix and the eigenvalues in use."""
    lap = _laplacian(g.edges, g.agent_count)
    d = incidence_matrix(g)
    eigvals = np.linalg.eigvalsh(lap)
    lambda2 = float(eigvals[1])
    lambda_max = float(eigvals[-1])
    if lambda2 <= CONNECTIVITY_TOL:
        raise DisconnectedGraph(
            f"graph is disconnected (lambda_2 = {lambda2:.3e})")
    return SpectralData(
        laplacian=lap,
        incidence=d,
        lambda2=lambda2,
        lambda_max=lambda_max,
        incidence_transpose_norm=float(np.sqrt(lambda_max)),
    )


@dataclass(frozen=True, eq=False)
class StackVector:
    """Stacked multi-agent state: agent 1's block first, then agent 2's, ..."""

    values: np.ndarray
    agent_count: int
    dimension: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        object.__setattr__(self, "values", vals)
        if vals.size != self.agent_count * self.dimension:
            raise DimensionMismatch(
                f"stack vector has {vals.size} entries, expected "
                f"{self.agent_count}*{self.dimension}")

    @classmethod
    def from_positions(cls, positions) -> "StackVector":
        pos = np.asarray(positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        return cls(pos.reshape(-1), pos.shape[0], pos.shape[1])

    def positions(self) -> np.ndarray:
        """(N, n) view of the stacked values."""
        return self.values.reshape(self.agent_count, self.dimension)

    def agent(self, i: int) -> np.ndarray:
        """Agent i's coordinate block (1-based)."""
        if not 1 <= i <= self.agent_count:
            raise DimensionMismatch(f"no agent {i} in a {self.agent_count}-agent stack")
        return self.positions()[i - 1]

    def component(self, k: int) -> np.ndarray:
        """The k-th coordinate (1-based) of every agent, as a length-N vector."""
        if not 1 <= k <= self.dimension:
            raise DimensionMismatch(f"no component {k} in dimension {self.dimension}")
        return self.positions()[:, k - 1]


def _as_stack(g: NetworkGraph, x) -> StackVector:
    if isinstance(x, StackVector):
        if x.agent_count != g.agent_count or x.dimension != g.dimension:
            raise DimensionMismatch(
                f"stack vector is {x.agent_count}x{x.dimension}, graph wants "
                f"{g.agent_count}x{g.dimension}")
        return x
    vals = np.asarray(x, dtype=float).reshape(-1)
    if vals.size != g.agent_count * g.dimension:
        raise DimensionMismatch(
            f"vector has {vals.size} entries, expected "
            f"{g.agent_count}*{g.dimension}")
    return StackVector(vals, g.agent_count, g.dimension)


def relative_state(g: NetworkGraph, x) -> np.ndarray:
    """Edge-stacked relative state: block e is x_i - x_j for edge (i, j), i < j.

    Equals (D^T (x) per coordinate), stacked edge-major.
    """
    sv = _as_stack(g, x)
    pos = sv.positions()
    out = np.empty((g.edge_count, g.dimension))
    for e, (i, j) in enumerate(g.edges):
        out[e] = pos[i - 1] - pos[j - 1]
    return out.reshape(-1)


def perp_component(g: NetworkGraph, x) -> np.ndarray:
    """Projection of a stacked vector onto the disagreement subspace.

    Per coordinate, subtracts the average over agents (the component along
    the all-ones consensus direction).
    """
    sv = _as_stack(g, x)
    pos = sv.positions()
    return (pos - pos.mean(axis=0, keepdims=True)).reshape(-1)
