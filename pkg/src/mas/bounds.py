"""Reachability bounds and admissible discretization parameters.

The consensus drift with bounded free inputs ||v_i|| <= v_max converges into
a ball of relative-state radius K2 * v_max; everything downstream (cell size,
sampling period, deviation remainder) is computed from the constants below.

Key quantities:

* K2 = 2 sqrt(N) (N-1) ||D^T|| / lambda2^2 - invariance radius coefficient,
* R_bar = safety * K2 * v_max (safety > 1) - the working invariance radius,
* M = R_bar - drift magnitude bound used by the deviation remainder,
* L1 = max_i sqrt(deg_i), L2 = max_i deg_i, L = 3 L2 + 4 L1^2 - Lipschitz data,
* d_max_sup = (1-lambda)^2 v_max^2 / (4 M L) - supremum of usable cell diameters,
* [dt_lo, dt_hi] - admissible sampling periods for a chosen cell diameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DiameterTooLarge, SamplingOutOfRange
from .graph import NetworkGraph, SpectralData

# Relative tolerance for boundary comparisons and discriminant snapping; pure
# float evaluation of (1-lambda)^2 v^2 - 4*M*L*d leaves ~1 ulp noise when d is
# exactly the supremum, and the admissible interval must collapse there.
_REL_TOL = 1e-12


@dataclass(frozen=True)
class BoundsReport:
    """Constants tying the graph, input bound and reach margin together."""

    k2: float
    r_bar: float
    m_bound: float
    l1: float
    l2: float
    l_total: float
    v_max: float
    lambda_reach: float
    safety: float
    hypothesis_satisfied: bool = True

    def __post_init__(self):
        if not 0 < self.lambda_reach < 1:
            raise ValueError(f"lambda_reach must be in (0,1), got {self.lambda_reach}")
        if self.v_max <= 0:
            raise ValueError(f"v_max must be positive, got {self.v_max}")


@dataclass(frozen=True)
class DiscretizationRange:
    """Admissible cell-diameter/sampling-period choices for a bounds report."""

    d_max_sup: float
    dt_lo: float
    dt_hi: float
    chosen_d_max: float
    chosen_dt: float


def lipschitz_constants(g: NetworkGraph) -> tuple[float, float, float]:
    """(L1, L2, L): degree-based Lipschitz data of the coupled drift.

    L1 = max_i sqrt(deg_i), L2 = max_i deg_i, and the combined constant
    L = max_i (3 L2 + 4 L1 sqrt(deg_i)) = 3 L2 + 4 L1^2.
    """
    degrees = [g.degree(i) for i in range(1, g.agent_count + 1)]
    l2 = float(max(degrees))
    l1 = math.sqrt(l2)
    l_total = 3.0 * l2 + 4.0 * l1 * l1
    return l1, l2, l_total


def theorem1_constants(
    spec: SpectralData,
    g: NetworkGraph,
    v_max: float,
    safety: float = 1.1,
    lambda_reach: float = 0.5,
    r_bar_override: float | None = None,
) -> BoundsReport:
    """Full bounds report for a graph and input budget.

    ``safety`` must exceed 1 so that R_bar > K2 v_max (the entry condition
    needs a strict gap). An explicit ``r_bar_override`` is accepted for
    reporting on externally imposed radii; if it does not exceed K2 v_max the
    report is flagged ``hypothesis_satisfied=False`` rather than rejected.
    """
    if safety <= 1.0:
        raise ValueError(f"safety factor must exceed 1, got {safety}")
    n = g.agent_count
    k2 = 2.0 * math.sqrt(n) * (n - 1) * spec.incidence_transpose_norm / spec.lambda2**2
    if r_bar_override is None:
        r_bar = safety * k2 * v_max
        hypothesis = True
    else:
        r_bar = float(r_bar_override)
        hypothesis = r_bar > k2 * v_max
    l1, l2, l_total = lipschitz_constants(g)
    return BoundsReport(
        k2=k2,
        r_bar=r_bar,
        m_bound=r_bar,
        l1=l1,
        l2=l2,
        l_total=l_total,
        v_max=v_max,
        lambda_reach=lambda_reach,
        safety=safety,
        hypothesis_satisfied=hypothesis,
    )


def _dt_interval(report: BoundsReport, d_max: float) -> tuple[float, float]:
    one_minus = 1.0 - report.lambda_reach
    ml = report.m_bound * report.l_total
    top = (one_minus * report.v_max) ** 2
    disc = top - 4.0 * ml * d_max
    if abs(disc) <= _REL_TOL * top:
        disc = 0.0  # snap float noise at the supremum; disc >= 0 holds exactly
    if disc < 0.0:
        raise DiameterTooLarge(
            f"cell diameter {d_max} exceeds the supremum {top / (4.0 * ml)}")
    root = math.sqrt(disc)
    return (
        (one_minus * report.v_max - root) / (2.0 * ml),
        (one_minus * report.v_max + root) / (2.0 * ml),
    )


def discretization_range(
    report: BoundsReport,
    chosen_d_max: float | None = None,
    chosen_dt: float | None = None,
) -> DiscretizationRange:
    """Validate/choose a cell diameter and sampling period.

    Defaults: half the supremum diameter, and the midpoint of the admissible
    period interval for that diameter. Raises DiameterTooLarge and
    SamplingOutOfRange for explicit out-of-range choices (with a 1e-12
    relative tolerance at the boundaries, so choosing the supremum itself or
    an interval endpoint is legal).
    """
    one_minus = 1.0 - report.lambda_reach
    ml = report.m_bound * report.l_total
    d_max_sup = (one_minus * report.v_max) ** 2 / (4.0 * ml)
    if chosen_d_max is None:
        chosen_d_max = 0.5 * d_max_sup
    if chosen_d_max <= 0:
        raise ValueError(f"cell diameter must be positive, got {chosen_d_max}")
    if chosen_d_max > d_max_sup * (1.0 + _REL_TOL):
        raise DiameterTooLarge(
            f"cell diameter {chosen_d_max} exceeds the supremum {d_max_sup}")
    dt_lo, dt_hi = _dt_interval(report, min(chosen_d_max, d_max_sup))
    if chosen_dt is None:
        chosen_dt = 0.5 * (dt_lo + dt_hi)
    if not (dt_lo * (1.0 - _REL_TOL) - _REL_TOL <= chosen_dt
            <= dt_hi * (1.0 + _REL_TOL)):
        raise SamplingOutOfRange(
            f"sampling period {chosen_dt} outside [{dt_lo}, {dt_hi}] "
            f"for cell diameter {chosen_d_max}")
    return DiscretizationRange(
        d_max_sup=d_max_sup,
        dt_lo=dt_lo,
        dt_hi=dt_hi,
        chosen_d_max=chosen_d_max,
        chosen_dt=chosen_dt,
    )


def deviation_remainder(report: BoundsReport, dt: float) -> float:
    """Worst-case gap between the sampled-drift prediction and the true flow.

    rho(dt) = (M + v_max) * L * dt^2 * exp(L dt); a transition is well-posed
    when rho fits inside the target cell's inradius.
    """
    l = report.l_total
    return (report.m_bound + report.v_max) * l * dt * dt * math.exp(l * dt)
