"""Consensus drift, well-posed cell transitions, agent/product systems."""

import itertools
import math

import numpy as np
import pytest

from mas.abstraction import (AgentWTS, build_agent_wts, build_product, drift,
                             drift_all, feedback_input, transition_enabled)
from mas.bounds import discretization_range, theorem1_constants
from mas.errors import ArityMismatch, BudgetExceeded
from mas.graph import build_graph, spectral
from mas.partition import (LabeledRegion, ServiceLabeling, Workspace,
                           grid_decompose, refine_to_compliance)

from conftest import granted_chain_wts


def _pair_setup():
    """Two agents on a line segment with self-consistent bounds."""
    g = build_graph(2, [(1, 2)])
    rep = theorem1_constants(spectral(g), g, v_max=100.0, safety=1.05,
                             lambda_reach=0.5)
    disc = discretization_range(rep, chosen_d_max=0.336, chosen_dt=0.0103)
    ws = Workspace(np.array([0.0]), np.array([4.032]))
    grid = grid_decompose(ws, 0.336)
    regions = [LabeledRegion(np.array([0.672]), np.array([1.008]),
                             {1: frozenset({"port"})}),
               LabeledRegion(np.array([1.344]), np.array([1.68]),
                             {2: frozenset({"dock"})})]
    decomp, labeling = refine_to_compliance(regions, grid)
    return g, rep, disc, decomp, labeling


def test_drift_hand_values_on_path3():
    g = build_graph(3, [(1, 2), (2, 3)])
    x = np.array([[0.0], [1.0], [3.0]])
    assert drift(g, 1, x[0], x[[1]]) == pytest.approx([1.0])
    assert drift(g, 2, x[1], x[[0, 2]]) == pytest.approx([1.0])
    assert drift(g, 3, x[2], x[[1]]) == pytest.approx([-2.0])
    assert np.allclose(drift_all(g, x), [[1.0], [1.0], [-2.0]])


def test_drift_is_negative_laplacian_action():
    rng = np.random.default_rng(2)
    g = build_graph(4, [(1, 2), (2, 3), (3, 4), (1, 4)], dimension=3)
    x = rng.normal(size=(4, 3))
    lap = spectral(g).laplacian
    assert np.allclose(drift_all(g, x), -lap @ x, atol=1e-12)


def test_drift_neighbor_arity_checked():
    g = build_graph(3, [(1, 2), (2, 3)])
    with pytest.raises(ArityMismatch):
        drift(g, 1, np.zeros(1), np.zeros((2, 1)))  # agent 1 has one neighbor


def test_self_loops_are_always_well_posed():
    g, rep, disc, decomp, _ = _pair_setup()
    for source in (1, 5, 12):
        for nbr in (1, 6, 12):
            cert = transition_enabled(g, decomp, rep, disc, agent=1,
                                      source=source, neighbor_cells=(nbr,),
                                      target=source)
            assert cert is not None


def test_adjacent_moves_enabled_near_neighbors_only():
    g, rep, disc, decomp, _ = _pair_setup()
    # neighbor in the adjacent cell: moving toward it is fine
    assert transition_enabled(g, decomp, rep, disc, 1, 6, (7,), 5) is not None
    assert transition_enabled(g, decomp, rep, disc, 1, 6, (7,), 7) is not None
    # distant cells are out of one-step reach regardless of the neighbor
    assert transition_enabled(g, decomp, rep, disc, 1, 6, (7,), 3) is None
    assert transition_enabled(g, decomp, rep, disc, 1, 6, (7,), 9) is None
    # a far-away neighbor drags the drift term above the reach budget
    assert transition_enabled(g, decomp, rep, disc, 1, 6, (12,), 5) is None


def test_certificate_records_the_validated_move():
    g, rep, disc, decomp, _ = _pair_setup()
    cert = transition_enabled(g, decomp, rep, disc, 1, 6, (7,), 5)
    assert cert.agent == 1
    assert (cert.source, cert.target) == (6, 5)
    assert cert.neighbor_cells == (7,)
    assert np.linalg.norm(cert.nominal_input) \
        <= rep.lambda_reach * rep.v_max + 1e-9
    lo, hi = decomp.bounds(5)
    assert cert.remainder <= 0.5 * float(np.min(hi - lo))


def test_reach_budget_monotone_in_lambda():
    g = build_graph(2, [(1, 2)])
    ws = Workspace(np.array([0.0]), np.array([4.032]))
    grid = grid_decompose(ws, 0.336)
    decomp, _ = refine_to_compliance([], grid)
    counts = {}
    for lam in (0.3, 0.5):
        rep = theorem1_constants(spectral(g), g, v_max=100.0, safety=1.05,
                                 lambda_reach=lam)
        disc = discretization_range(rep, chosen_d_max=0.336, chosen_dt=0.0103)
        counts[lam] = sum(
            transition_enabled(g, decomp, rep, disc, 1, s, (n,), t) is not None
            for s in range(1, 13) for n in range(1, 13) for t in range(1, 13))
    assert counts[0.3] <= counts[0.5]


def test_agent_wts_construction_matches_scenario_shape():
    g, rep, disc, decomp, labeling = _pair_setup()
    w1 = build_agent_wts(g, 1, decomp, labeling, rep, disc, initial_cell=6)
    w2 = build_agent_wts(g, 2, decomp, labeling, rep, disc, initial_cell=7)
    assert w1.cells == tuple(range(1, 13))
    assert w1.initial == 6 and w2.initial == 7
    assert w1.neighbor_agents == (2,) and w2.neighbor_agents == (1,)
    assert w1.label(3) == frozenset({"port"}) and w1.label(5) == frozenset()
    assert w2.label(5) == frozenset({"dock"})
    # frozen shape of this fixture's table
    assert len(w1.transitions) == 144
    assert w1.transition_count() == 352
    assert len(w2.transitions) == 144
    # every enabled move carries a certificate, durations default to dt
    for action, targets in w1.transitions.items():
        for t in targets:
            assert w1.certificate(action[0], action, t) is not None
            assert w1.duration(action[0], action, t) == w1.dt
    # self-loops granted under every listed neighbor configuration
    for action in w1.transitions:
        assert action[0] in w1.transitions[action]


def test_agent_wts_action_budget():
    g, rep, disc, decomp, labeling = _pair_setup()
    with pytest.raises(BudgetExceeded):
        build_agent_wts(g, 1, decomp, labeling, rep, disc, initial_cell=6,
                        max_actions=100)


def test_wts_post_requires_matching_source():
    w = granted_chain_wts(1, (1, 2), {}, (), (1, 2), 1.0)
    assert w.post(1, (1,)) == (1, 2)
    with pytest.raises(ArityMismatch):
        w.post(2, (1,))


def test_product_synchronizes_agent_moves():
    dt = 1.0
    cells = (1, 2, 3)
    g = build_graph(2, [(1, 2)])
    w1 = granted_chain_wts(1, (1, 2, 3), {}, (2,), cells, dt)
    w2 = granted_chain_wts(2, (3, 2), {}, (1,), cells, dt)
    product = build_product([w1, w2], g)
    assert product.initial_states() == ((1, 3),)
    succ = [target for _, target, _ in product.successors((1, 3))]
    assert set(succ) == {(1, 3), (1, 2), (2, 3), (2, 2)}
    assert product.agent_action((1, 3), 1) == (1, 3)
    assert product.agent_action((1, 3), 2) == (3, 1)
    # dead joint states have no successors at all (synchronous semantics)
    assert product.successors((3, 1)) == []


def test_product_rejects_mismatched_sampling_periods():
    g = build_graph(2, [(1, 2)])
    w1 = granted_chain_wts(1, (1, 2), {}, (2,), (1, 2), 1.0)
    w2 = granted_chain_wts(2, (2, 1), {}, (1,), (1, 2), 0.5)
    with pytest.raises(ArityMismatch):
        build_product([w1, w2], g)


def test_feedback_input_compensates_drift():
    g = build_graph(2, [(1, 2)])
    positions = np.array([[0.0], [1.0]])
    # already at the target center: the input only cancels the coupling
    v, clipped = feedback_input(g, 1, positions, np.array([0.0]),
                                dt=0.5, v_max=10.0)
    assert not clipped
    assert v == pytest.approx([-1.0])
    # reach for a center half a cell away
    v, clipped = feedback_input(g, 1, positions, np.array([0.5]),
                                dt=0.5, v_max=10.0)
    assert not clipped
    assert v == pytest.approx([0.0])
    # saturated when the request exceeds the budget
    v, clipped = feedback_input(g, 1, positions, np.array([3.0]),
                                dt=0.5, v_max=1.0)
    assert clipped
    assert np.linalg.norm(v) == pytest.approx(1.0)


def test_validated_moves_cover_the_planning_chain():
    """The pair scenario's planned runs only use moves the abstraction
    actually validates under the neighbor cells seen along the runs."""
    g, rep, disc, decomp, labeling = _pair_setup()
    w1 = build_agent_wts(g, 1, decomp, labeling, rep, disc, initial_cell=6)
    w2 = build_agent_wts(g, 2, decomp, labeling, rep, disc, initial_cell=7)
    run1 = (6, 5, 4, 3)
    run2 = (7, 6, 5, 5)
    for k in range(3):
        assert run1[k + 1] in w1.post(run1[k], (run1[k], run2[k]))
        assert run2[k + 1] in w2.post(run2[k], (run2[k], run1[k]))
