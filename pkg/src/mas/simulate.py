"""Continuous execution of synthesized plans and invariance trials.

Closed-loop integration uses the piecewise-constant feedback law from the
abstraction (aim at the target cell's center, subtract the measured drift,
clamp to the input bound) and a fixed-step RK4 integrator with `substeps`
stages per sampling interval. Leaving the workspace at any integration node
is an error; saturated inputs are reported with a warning because a
well-posed plan never needs them.

The helpers at the bottom turn a continuous trajectory back into discrete
data: the cell occupied at every sampling boundary, the services provided
(merging consecutive boundaries in the same cell into a single visit, stamped
at the midpoint of its first interval), and relative-state norms for
boundedness checks.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .abstraction import drift_all, feedback_input
from .errors import (DimensionMismatch, InputSaturationFlag, LabelMismatch,
                     SemanticError, WorkspaceExit)
from .graph import NetworkGraph, relative_state
from .partition import CellDecomposition, ServiceLabeling, Workspace, cell_of

logger = logging.getLogger(__name__)

WORKSPACE_TOL = 1e-9


@dataclass(eq=False)
class Trajectory:
    """Dense integration output.

    states[k] is the configuration (agents x dimension) at times[k]; node
    j*substeps is the sampling boundary t_j. inputs[j] is the constant input
    applied over [t_j, t_{j+1}).
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    dt: float
    substeps: int
    saturated: tuple[tuple[int, int], ...] = ()

    @property
    def steps(self) -> int:
        return self.inputs.shape[0]

    def boundary_state(self, j: int) -> np.ndarray:
        return self.states[j * self.substeps]

    def relative_norms(self, g: NetworkGraph) -> np.ndarray:
        """Norm of the stacked relative state at every integration node."""
        out = np.empty(self.states.shape[0])
        for k in range(self.states.shape[0]):
            out[k] = np.linalg.norm(relative_state(g, self.states[k]))
        return out


def _rk4_step(g: NetworkGraph, x: np.ndarray, v: np.ndarray,
              h: float) -> np.ndarray:
    def f(state):
        return drift_all(g, state) + v

    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_workspace(workspace: Workspace, x: np.ndarray, t: float) -> None:
    low = workspace.lower - WORKSPACE_TOL
    high = workspace.upper + WORKSPACE_TOL
    bad = np.nonzero(np.any((x < low) | (x > high), axis=1))[0]
    if bad.size:
        raise WorkspaceExit(
            f"agent {int(bad[0]) + 1} left the workspace at t={t:.6g}")


def integrate_inputs(g: NetworkGraph, x0: np.ndarray, inputs: np.ndarray,
                     dt: float, substeps: int = 4,
                     workspace: Workspace | None = None) -> Trajectory:
    """Integrate the coupled dynamics under given piecewise-constant inputs.

    inputs has shape (steps, agents, dimension); each row is held constant
    for one interval of length dt. Workspace policing is optional here so
    the same stepper serves open-loop invariance trials.
    """
    x0 = np.asarray(x0, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    if x0.shape != (g.agent_count, g.dimension):
        raise DimensionMismatch(
            f"initial state must have shape {(g.agent_count, g.dimension)}, "
            f"got {x0.shape}")
    if inputs.ndim != 3 or inputs.shape[1:] != (g.agent_count, g.dimension):
        raise DimensionMismatch(
            f"inputs must have shape (steps, {g.agent_count}, "
            f"{g.dimension}), got {inputs.shape}")
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    steps = inputs.shape[0]
    h = dt / substeps
    total = steps * substeps
    times = np.arange(total + 1) * h
    states = np.empty((total + 1, g.agent_count, g.dimension))
    states[0] = x0
    if workspace is not None:
        _check_workspace(workspace, x0, 0.0)
    k = 0
    for j in range(steps):
        v = inputs[j]
        for _ in range(substeps):
            states[k + 1] = _rk4_step(g, states[k], v, h)
            k += 1
            if workspace is not None:
                _check_workspace(workspace, states[k], times[k])
    return Trajectory(times=times, states=states, inputs=inputs.copy(),
                      dt=dt, substeps=substeps)


def integrate_plans(g: NetworkGraph, plans: list, decomp: CellDecomposition,
                    x0: np.ndarray, v_max: float, steps: int,
                    substeps: int = 4) -> Trajectory:
    """Execute plans in closed loop from x0 for the given number of steps.

    The input for step j is recomputed from the measured state at t_j and
    aims at the center of each agent's next planned cell. Raises
    SemanticError if x0 is not inside the plans' first cells, WorkspaceExit
    if any agent ever leaves the workspace.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (g.agent_count, g.dimension):
        raise DimensionMismatch(
            f"initial state must have shape {(g.agent_count, g.dimension)}, "
            f"got {x0.shape}")
    if len(plans) != g.agent_count:
        raise SemanticError(
            f"need {g.agent_count} plans, got {len(plans)}")
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    dt = plans[0].dt
    for plan in plans:
        if plan.dt != dt:
            raise SemanticError("plans disagree on the sampling interval")
    for i, plan in enumerate(plans):
        start = cell_of(decomp, x0[i])
        if start != plan.cell_at(0):
            raise SemanticError(
                f"agent {i + 1} starts in cell {start}, but its plan begins "
                f"in cell {plan.cell_at(0)}")

    workspace = decomp.workspace
    h = dt / substeps
    total = steps * substeps
    times = np.arange(total + 1) * h
    states = np.empty((total + 1, g.agent_count, g.dimension))
    states[0] = x0
    inputs = np.empty((steps, g.agent_count, g.dimension))
    saturated: list[tuple[int, int]] = []
    _check_workspace(workspace, x0, 0.0)
    k = 0
    for j in range(steps):
        x_now = states[k]
        for i, plan in enumerate(plans):
            target = plan.cell_at(j + 1)
            center = decomp.center(target)
            v, clipped = feedback_input(g, i + 1, x_now, center, dt, v_max)
            inputs[j, i] = v
            if clipped:
                saturated.append((j, i + 1))
        v_step = inputs[j]
        for _ in range(substeps):
            states[k + 1] = _rk4_step(g, states[k], v_step, h)
            k += 1
            _check_workspace(workspace, states[k], times[k])
    if saturated:
        warnings.warn(
            f"feedback input saturated at {len(saturated)} (step, agent) "
            f"pairs; first at step {saturated[0][0]} for agent "
            f"{saturated[0][1]}", InputSaturationFlag, stacklevel=2)
    logger.info("integrated %d steps (%d nodes) up to t=%.6g", steps,
                total + 1, float(times[-1]))
    return Trajectory(times=times, states=states, inputs=inputs, dt=dt,
                      substeps=substeps, saturated=tuple(saturated))


def boundary_cells(traj: Trajectory, decomp: CellDecomposition) -> np.ndarray:
    """Cell index of every agent at every sampling boundary, (steps+1, N)."""
    steps = traj.steps
    n_agents = traj.states.shape[1]
    out = np.empty((steps + 1, n_agents), dtype=int)
    for j in range(steps + 1):
        x = traj.boundary_state(j)
        for i in range(n_agents):
            out[j, i] = cell_of(decomp, x[i])
    return out


def verify_against_plans(traj: Trajectory, decomp: CellDecomposition,
                         plans: list) -> np.ndarray:
    """Check the executed boundary cells against the planned ones.

    Returns the boundary-cell table on success; raises LabelMismatch at the
    first disagreement.
    """
    cells = boundary_cells(traj, decomp)
    for j in range(cells.shape[0]):
        for i, plan in enumerate(plans):
            expected = plan.cell_at(j)
            actual = int(cells[j, i])
            if actual != expected:
                raise LabelMismatch(
                    f"agent {i + 1} at step {j}: plan visits cell "
                    f"{expected}, execution reached cell {actual}")
    return cells


def extract_service_word(
    traj: Trajectory,
    decomp: CellDecomposition,
    labeling: ServiceLabeling,
    plans: list | None = None,
) -> dict[int, tuple[tuple[float, frozenset[str]], ...]]:
    """Services each agent provides along the executed trajectory.

    Consecutive boundaries in the same cell merge into one visit; the visit
    is stamped at the midpoint of its first sampling interval. Only visits
    that provide at least one service are reported. When plans are given the
    executed boundary cells are first checked against them (LabelMismatch).
    """
    if plans is not None:
        cells = verify_against_plans(traj, decomp, plans)
    else:
        cells = boundary_cells(traj, decomp)
    out: dict[int, tuple[tuple[float, frozenset[str]], ...]] = {}
    for i in range(cells.shape[1]):
        agent = i + 1
        visits: list[tuple[float, frozenset[str]]] = []
        j = 0
        while j < cells.shape[0]:
            cell = int(cells[j, i])
            run_end = j
            while run_end + 1 < cells.shape[0] and \
                    int(cells[run_end + 1, i]) == cell:
                run_end += 1
            services = labeling.label(agent, cell)
            if services:
                visits.append(((j + 0.5) * traj.dt, services))
            j = run_end + 1
        out[agent] = tuple(visits)
    return out


@dataclass(eq=False)
class BoundednessReport:
    """Relative-state norms of one open-loop trial against the bound."""

    initial_norm: float
    peak_norm: float
    final_norm: float
    r_bar: float
    tolerance: float

    @property
    def bound(self) -> float:
        return max(self.initial_norm, self.r_bar)

    @property
    def contained(self) -> bool:
        return self.peak_norm <= self.bound + self.tolerance

    @property
    def entered(self) -> bool:
        return self.final_norm <= self.r_bar + self.tolerance


def verify_boundedness(g: NetworkGraph, r_bar: float, x0: np.ndarray,
                       inputs: np.ndarray, dt: float, substeps: int = 8,
                       tol: float = 1e-6) -> BoundednessReport:
    """Run one open-loop trial and compare relative-state norms to r_bar.

    The invariance claim under test: the relative-state norm never exceeds
    max(initial norm, r_bar) by more than the tolerance, no matter which
    admissible inputs are applied.
    """
    traj = integrate_inputs(g, x0, inputs, dt, substeps=substeps)
    norms = traj.relative_norms(g)
    return BoundednessReport(
        initial_norm=float(norms[0]),
        peak_norm=float(norms.max()),
        final_norm=float(norms[-1]),
        r_bar=float(r_bar),
        tolerance=tol,
    )


def bang_bang_inputs(g: NetworkGraph, v_max: float, steps: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Adversarial piecewise-constant inputs at the full magnitude v_max.

    Each agent gets an independent random direction per interval, scaled to
    norm exactly v_max - the worst case the boundedness result must absorb.
    """
    raw = rng.normal(size=(steps, g.agent_count, g.dimension))
    norms = np.linalg.norm(raw, axis=2, keepdims=True)
    norms[norms == 0.0] = 1.0
    return v_max * raw / norms
