import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warmnet.equilibrium import (
    ConvergenceError,
    apply_T,
    compact_set_bounds,
    multistart,
    solve_fixed_point,
    verify_equilibrium,
)
from warmnet.graph import (
    build_cycle,
    build_from_edges,
    build_grid,
    build_path,
    build_random_regular,
    build_star,
    build_torus,
)


def brute_T(mu, g, alpha):
    """Operator straight from its definition, one edge at a time."""
    out = []
    for e, (u, v) in enumerate(g.edges):
        total = 0.0
        for end in (u, v):
            denom = sum(mu[f] ** alpha for f in g.incidence[end])
            total += mu[e] ** alpha / denom
        out.append(total)
    return np.array(out)


def test_T_cycle_constant_one():
    g = build_cycle(12)
    np.testing.assert_allclose(apply_T(np.ones(12), g, 0.4), 1.0, rtol=1e-15)


@pytest.mark.parametrize("alpha", [0.0, 0.3, 0.9])
def test_T_path_two_edges(alpha):
    g = build_path(2)
    mu = np.array([1.5, 1.5])
    np.testing.assert_allclose(apply_T(mu, g, alpha), [1.5, 1.5], rtol=1e-15)
    np.testing.assert_allclose(brute_T(mu, g, alpha), [1.5, 1.5], rtol=1e-15)


@pytest.mark.parametrize("g", [build_torus(2, 4), build_torus(3, 3), build_random_regular(20, 4, 3)])
def test_T_regular_fixed_point(g):
    mu = np.full(g.edge_count, 2 / g.max_degree)
    np.testing.assert_allclose(apply_T(mu, g, 0.37), mu, rtol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 0.95))
def test_T_matches_brute_force(seed, alpha):
    g = build_grid(2, 4)
    mu = np.random.default_rng(seed).uniform(0.05, 3, g.edge_count)
    np.testing.assert_allclose(apply_T(mu, g, alpha), brute_T(mu, g, alpha), rtol=1e-13)


def test_T_rejects_nonpositive():
    with pytest.raises(ValueError):
        apply_T(np.array([1.0, 0.0]), build_path(2), 0.5)


def test_compact_set_bounds():
    assert compact_set_bounds(4, 0.5) == pytest.approx((0.125, 2.0), rel=1e-15)
    assert compact_set_bounds(1, 0.3) == (2.0, 2.0)
    assert compact_set_bounds(2, 0.5) == pytest.approx((0.5, 2.0), rel=1e-15)
    with pytest.raises(ValueError):
        compact_set_bounds(3, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 0.95), st.sampled_from(["grid", "star", "rr"]))
def test_T_preserves_box(seed, alpha, kind):
    g = {"grid": build_grid(2, 5), "star": build_star(6), "rr": build_random_regular(30, 4, 1)}[kind]
    lo, hi = compact_set_bounds(g.max_degree, alpha)
    mu = np.random.default_rng(seed).uniform(lo, hi, g.edge_count)
    out = apply_T(mu, g, alpha)
    assert np.all(out >= lo * (1 - 1e-12)) and np.all(out <= hi * (1 + 1e-12))


def test_solve_cycle():
    res = solve_fixed_point(build_cycle(100), 0.4, tol=1e-12)
    assert np.max(np.abs(res.mu - 1.0)) <= 1e-9


def test_solve_single_edge():
    for alpha in (0.0, 0.5, 0.9):
        res = solve_fixed_point(build_path(1), alpha)
        assert res.mu.tolist() == [2.0]


def undamped_iteration(g, alpha, mu, steps=5000):
    for _ in range(steps):
        mu = brute_T(mu, g, alpha)
    return mu


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
def test_solve_star(alpha):
    g = build_star(3)
    res = solve_fixed_point(g, alpha)
    np.testing.assert_allclose(res.mu, 4 / 3, atol=1e-9)
    np.testing.assert_allclose(undamped_iteration(g, alpha, np.array([0.5, 1.0, 1.9])), 4 / 3, atol=1e-12)


def test_solve_grid_against_brute_iteration():
    g = build_grid(2, 4)
    res = solve_fixed_point(g, 0.45)
    ok, resid = verify_equilibrium(res.mu, g, 0.45, 1e-12 * 3)
    assert ok and resid == res.residual
    ref = undamped_iteration(g, 0.45, np.ones(g.edge_count), steps=3000)
    np.testing.assert_allclose(res.mu, ref, atol=1e-9)
    lo, hi = compact_set_bounds(g.max_degree, 0.45)
    assert np.all((res.mu >= lo) & (res.mu <= hi))


def test_solve_residual_bound():
    tol, damping = 1e-10, 0.3
    g = build_star(5)
    res = solve_fixed_point(g, 0.6, tol=tol, damping=damping)
    assert res.residual <= tol * (1 + 1 / damping)


def test_solve_nonconvergence_reports():
    with pytest.raises(ConvergenceError) as info:
        solve_fixed_point(build_grid(2, 5), 0.5, tol=1e-15, max_iter=3)
    assert len(info.value.residual_history) == 3
    assert info.value.last_iterate.shape == (40,)


def test_solve_argument_checks():
    g = build_cycle(5)
    with pytest.raises(ValueError):
        solve_fixed_point(g, 0.4, damping=0.0)
    with pytest.raises(ValueError):
        solve_fixed_point(g, 0.4, tol=0.0)
    with pytest.raises(ValueError):
        solve_fixed_point(g, 1.0)


def test_isolated_vertices_allowed():
    g = build_from_edges(5, [(0, 1), (1, 2)])
    res = solve_fixed_point(g, 0.5)
    np.testing.assert_allclose(res.mu, [1.5, 1.5], atol=1e-9)


def test_verify_examples():
    g = build_cycle(10)
    assert verify_equilibrium(np.ones(10), g, 0.4, 1e-10) == (True, 0.0)
    ok, resid = verify_equilibrium(np.full(10, 1.1), g, 0.4, 1e-10)
    assert not ok and resid == pytest.approx(0.1, abs=1e-14)
    assert verify_equilibrium(np.array([1.5, 1.5]), build_path(2), 0.7, 1e-12)[0]


def test_permutation_equivariance():
    g = build_grid(2, 4)
    rng = np.random.default_rng(4)
    vperm = rng.permutation(g.vertex_count)
    eperm = rng.permutation(g.edge_count)  # new edge i is old edge eperm[i]
    relabeled = build_from_edges(
        g.vertex_count, [(vperm[g.edges[old][0]], vperm[g.edges[old][1]]) for old in eperm]
    )
    a = solve_fixed_point(g, 0.35).mu
    b = solve_fixed_point(relabeled, 0.35).mu
    np.testing.assert_allclose(b, a[eperm], atol=1e-10)


def test_multistart_agreement():
    g = build_grid(2, 4)
    res = multistart(g, 0.4, restarts=5, seed=2)
    assert len(res.solutions) == 6
    assert res.agree(1e-8)
