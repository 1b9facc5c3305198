import numpy as np
import pytest
from hypothesis import assume, given, settings
from numpy.testing import assert_allclose

from _fixtures import attacked_case
from _oracles import binary_support_minimizers
from gridverify.attack import (
    AttackScenario,
    compute_post_attack,
    sample_failures,
)
from gridverify.fld import (
    InfeasibleModel,
    Observables,
    build_p1,
    constraint_residual,
    estimate,
    estimate_connected,
    observe,
)
from gridverify.grid import GridTopology, solve_dc_power_flow


def make_top(links, injections, nodes=None):
    links = sorted(links)
    if nodes is None:
        nodes = sorted({n for _, s, t, _ in links for n in (s, t)})
    pos = {n: i for i, n in enumerate(nodes)}
    inj = np.zeros(len(nodes))
    for n, p in injections.items():
        inj[pos[n]] = p
    return GridTopology(
        node_ids=tuple(nodes),
        injections=inj,
        link_ids=tuple(l for l, _, _, _ in links),
        endpoints=tuple((s, t) for _, s, t, _ in links),
        reactance=np.array([r for _, _, _, r in links]),
    )


def simulate(top, scenario):
    theta = solve_dc_power_flow(top, top.injections)
    post = compute_post_attack(top, scenario)
    return observe(top, scenario, theta, post), post


def triangle_scenario():
    top = make_top(
        [(1, 1, 2, 1.0), (2, 2, 3, 1.0), (3, 1, 3, 1.0)],
        injections={1: 2.0, 2: -1.0, 3: -1.0},
    )
    scen = AttackScenario(
        v_h=frozenset({1, 2, 3}), e_h=frozenset({1, 2, 3}), f=frozenset({1})
    )
    return top, scen


def test_empty_area_estimates_nothing():
    top, _ = triangle_scenario()
    scen = AttackScenario(v_h=frozenset({2}), e_h=frozenset(), f=frozenset())
    obs, _ = simulate(top, scen)
    est = estimate(obs)
    assert est.f_hat == frozenset()
    assert est.x_h.shape == (0,)


def test_no_failures_estimates_empty_set():
    top, _ = triangle_scenario()
    scen = AttackScenario(
        v_h=frozenset({1, 2, 3}), e_h=frozenset({1, 2, 3}), f=frozenset()
    )
    obs, _ = simulate(top, scen)
    est = estimate(obs)
    assert est.f_hat == frozenset()
    assert_allclose(est.x_h, 0.0, atol=1e-9)


def test_bridge_failure_detected():
    # generator(+2) - a(-1) - b(0) - load(-1); area {b, load}, bridge fails.
    top = make_top(
        [(1, 1, 2, 1.0), (2, 2, 3, 1.0), (3, 3, 4, 1.0)],
        injections={1: 2.0, 2: -1.0, 3: 0.0, 4: -1.0},
    )
    scen = AttackScenario(
        v_h=frozenset({3, 4}), e_h=frozenset({3}), f=frozenset({3})
    )
    obs, post = simulate(top, scen)
    # The cut-off load island sheds fully; the surviving side halves its
    # generation, leaving a nonzero hypothetical flow on the failed link.
    assert post.theta_post[2] != post.theta_post[3]
    est = estimate(obs)
    assert est.f_hat == frozenset({3})


def test_threshold_boundary_included():
    # Hand-built observables forcing x = 0.5 exactly on a single link.
    top = make_top([(1, 1, 2, 1.0)], injections={1: 1.0, 2: -1.0})
    obs = Observables(
        topology=top,
        v_h=frozenset({1, 2}),
        theta_pre=np.array([0.0, -1.0]),
        theta_post=np.array([0.0, -2.0]),
        delta_outside={},
    )
    est = estimate_connected(obs, eta=0.5)
    assert est.x_h[0] == pytest.approx(0.5, abs=1e-9)
    assert est.f_hat == frozenset({1})


def test_connected_variant_recovers_exact_set():
    top, scen = triangle_scenario()
    obs, post = simulate(top, scen)
    assert len(post.island_partition) == 1
    est = estimate_connected(obs)
    assert est.f_hat == frozenset({1})
    assert_allclose(est.x_h, [1.0, 0.0, 0.0], atol=1e-8)
    assert_allclose(est.delta_h_est, 0.0)


def test_connected_variant_rejects_split_grid():
    top = make_top(
        [(1, 1, 2, 1.0), (2, 2, 3, 1.0), (3, 3, 4, 1.0)],
        injections={1: 2.0, 2: -1.0, 3: 0.0, 4: -1.0},
    )
    scen = AttackScenario(
        v_h=frozenset({3, 4}), e_h=frozenset({3}), f=frozenset({3})
    )
    obs, post = simulate(top, scen)
    assert len(post.island_partition) == 2
    with pytest.raises(InfeasibleModel):
        estimate_connected(obs)


def test_eta_domain_checked():
    top, scen = triangle_scenario()
    obs, _ = simulate(top, scen)
    with pytest.raises(ValueError):
        estimate(obs, eta=0.0)
    with pytest.raises(ValueError):
        estimate(obs, eta=1.0)


# ---------------------------------------------------------------------------
# properties


@given(attacked_case())
@settings(max_examples=120, deadline=None)
def test_ground_truth_is_feasible(case):
    top, scen = case
    obs, post = simulate(top, scen)
    links = obs.area_links()
    nodes = obs.area_nodes()
    x_true = np.array([1.0 if l in scen.f else 0.0 for l in links])
    delta_true = np.array([post.delta[top.node_pos(n)] for n in nodes])
    assert constraint_residual(obs, x_true, delta_true) <= 1e-6

    est = estimate(obs)
    # The relaxation can only do better than the true point.
    assert est.x_h.sum() <= len(scen.f) + 1e-6
    if not scen.f:
        assert est.f_hat == frozenset()


@given(attacked_case(max_nodes=6))
@settings(max_examples=60, deadline=None)
def test_matches_exhaustive_binary_search_when_tight(case):
    top, scen = case
    obs, _ = simulate(top, scen)
    assume(len(obs.e_h) <= 10)
    est = estimate(obs)
    best_k, minimizers = binary_support_minimizers(obs)
    assert best_k is not None  # the true assignment is always feasible
    assert best_k <= len(scen.f)
    if len(minimizers) == 1 and abs(est.x_h.sum() - best_k) < 1e-6:
        assert est.f_hat == minimizers[0]


def test_p1_shape_and_bounds():
    top, scen = triangle_scenario()
    obs, _ = simulate(top, scen)
    lp = build_p1(obs)
    # 3 links + 3 nodes; one equality row per area node.
    assert lp.a_eq.shape == (3, 6)
    lo, hi = lp.bound_arrays()
    assert_allclose(lo[:3], 0.0)
    assert_allclose(hi[:3], 1.0)
    # Generator delta in [0, p]; load deltas in [p, 0].
    assert (lo[3], hi[3]) == (0.0, 2.0)
    assert (lo[4], hi[4]) == (-1.0, 0.0)
    assert (lo[5], hi[5]) == (-1.0, 0.0)
