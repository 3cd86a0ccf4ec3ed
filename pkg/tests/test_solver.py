"""Time stepping: fixed points, dissipation certificates, interpolants."""

import dataclasses

import numpy as np
import pytest

from conftest import bump_data, node_grid, sp_data

from anisodenoise import (
    ENERGY_SLACK_RTOL,
    MAX_PRINCIPLE_TOL,
    Anisotropy,
    GridMismatchError,
    MaxPrincipleError,
    ModelParams,
    ScalarField,
    SolveConfig,
    minimize_step,
    norm_l2,
    residuals_S,
    run,
    solve_initial_orientation,
)
from anisodenoise.solver import Trajectory


def l1(eps=0.25):
    return Anisotropy("smoothed-l1", eps)


def small_params(**kw):
    base = dict(kappa=1.0, mu=0.2, nu=0.1, lam=5.0, p=3.0, tau=0.1, t_final=0.3)
    base.update(kw)
    return ModelParams(**base)


def bump_instance(tau=0.05, t_final=0.15, lam=5.0, family="smoothed-l1"):
    rng = np.random.default_rng(15)
    n = 12
    u0, org = bump_data(n, rng)
    g = node_grid(n)
    pr = small_params(tau=tau, t_final=t_final, lam=lam)
    return ScalarField(g, u0), ScalarField(g, org), pr, Anisotropy(family, 0.25)


def test_zero_data_is_exact_fixed_point():
    g = node_grid(8)
    z = ScalarField.zeros(g)
    traj = run(z, z, small_params(), l1(0.5))
    for alpha, u in zip(traj.alphas, traj.us):
        np.testing.assert_array_equal(alpha.values, np.zeros(g.shape))
        np.testing.assert_array_equal(u.values, np.zeros(g.shape))
    for rep in traj.reports:
        assert rep.energy_after.total == 0.0
        assert rep.dissipation_l2 == 0.0 and rep.dissipation_h1 == 0.0


def test_energy_descent_and_certificates():
    rng = np.random.default_rng(6)
    n = 8
    u0, org = sp_data(n, rng)
    g = node_grid(n)
    traj = run(ScalarField(g, u0), ScalarField(g, org), small_params(), l1())
    totals = [r.energy_after.total for r in traj.reports]
    e0 = totals[0]
    floor = ENERGY_SLACK_RTOL * (1.0 + abs(e0))
    for a, b in zip(totals, totals[1:]):
        assert b <= a + floor
    for rep in traj.reports[1:]:
        assert rep.ineq_slack >= -floor
        assert max(rep.res_alpha, rep.res_u) <= rep.tol
        psis = rep.psi_values
        for x, y in zip(psis, psis[1:]):
            assert y <= x + 1e-10 * (1.0 + abs(psis[0]))


def test_intensity_stays_in_unit_interval():
    rng = np.random.default_rng(101)
    n = 16
    u0, org = sp_data(n, rng)
    g = node_grid(n)
    pr = small_params(mu=0.25, lam=20.0, tau=0.05, t_final=0.15)
    traj = run(ScalarField(g, u0), ScalarField(g, org), pr, l1())
    for u in traj.us:
        assert u.values.min() >= -MAX_PRINCIPLE_TOL
        assert u.values.max() <= 1.0 + MAX_PRINCIPLE_TOL


def test_large_lambda_clamps_to_datum():
    gaps = {}
    for lam in (1e4, 1e5):
        u0, org, pr, a = bump_instance(lam=lam, family="smoothed-euclid")
        traj = run(u0, org, pr, a)
        gaps[lam] = norm_l2(ScalarField(u0.grid, traj.us[-1].values - org.values))
    ratio = gaps[1e5] / gaps[1e4]
    assert 0.07 <= ratio <= 0.14


def test_interpolants_average_and_snap():
    u0, org, pr, a = bump_instance(tau=0.1, t_final=0.3)
    traj = run(u0, org, pr, a)

    au, uu = traj.state_upper(0.15)
    assert uu is traj.us[2] and au is traj.alphas[2]
    al, ul = traj.state_lower(0.15)
    assert ul is traj.us[1] and al is traj.alphas[1]

    # linear interpolant at the interval midpoint is the two-state average
    am, um = traj.state_linear(0.15)
    np.testing.assert_allclose(
        um.values, 0.5 * (traj.us[1].values + traj.us[2].values), rtol=0, atol=1e-12
    )
    np.testing.assert_allclose(
        am.values, 0.5 * (traj.alphas[1].values + traj.alphas[2].values), rtol=0, atol=1e-12
    )

    # step times snap exactly, also under tiny rounding offsets
    for t, i in ((0.0, 0), (0.1, 1), (0.1 + 1e-12, 1), (0.3, 3)):
        _, u = traj.state_linear(t)
        np.testing.assert_array_equal(u.values, traj.us[i].values)

    for t in (-0.2, 0.35):
        with pytest.raises(ValueError):
            traj.state_linear(t)
        with pytest.raises(ValueError):
            traj.state_upper(t)


def test_runs_are_deterministic():
    u0, org, pr, a = bump_instance()
    t1 = run(u0, org, pr, a)
    t2 = run(u0, org, pr, a)
    for x, y in zip(t1.us + t1.alphas, t2.us + t2.alphas):
        np.testing.assert_array_equal(x.values, y.values)
    for r1, r2 in zip(t1.reports, t2.reports):
        assert r1.res_alpha == r2.res_alpha and r1.res_u == r2.res_u
        assert r1.energy_after.total == r2.energy_after.total


def test_residuals_at_step_times_meet_tolerance():
    u0, org, pr, a = bump_instance(tau=0.05, t_final=0.2)
    traj = run(u0, org, pr, a)
    for rep in traj.reports[1:]:
        r = residuals_S(traj, rep.t)
        assert r.res_s1 <= rep.tol
        assert abs(r.res_s1 - rep.res_alpha) <= 1e-12 * (1.0 + rep.res_alpha)
        assert r.res_s2_slack == 0.0


def test_between_step_residual_shrinks_with_tau():
    vals = []
    for tau in (0.1, 0.01, 0.001):
        u0, org, pr, a = bump_instance(tau=tau, t_final=0.2)
        traj = run(u0, org, pr, a)
        r = residuals_S(traj, 0.1 + tau / 2.0)
        assert r.res_s2_slack == 0.0
        vals.append(r.res_s1)
    assert vals[1] < 0.2 * vals[0]
    assert vals[2] < 0.2 * vals[1]


def test_max_principle_violation_aborts():
    rng = np.random.default_rng(3)
    n = 16
    u0, org = sp_data(n, rng)
    g = node_grid(n)
    pr = small_params(mu=1.25, nu=0.2, lam=50.0, tau=0.05, t_final=0.15)
    with pytest.raises(MaxPrincipleError):
        run(ScalarField(g, u0), ScalarField(g, org), pr, l1())


def test_initial_orientation_flat_data_is_zero():
    g = node_grid(8)
    alpha0, rep = solve_initial_orientation(ScalarField.zeros(g), small_params(), l1())
    np.testing.assert_array_equal(alpha0.values, np.zeros(g.shape))
    assert rep.index == 0 and rep.t == 0.0
    assert rep.res_alpha <= rep.tol


def test_initial_orientation_multistart_spread_recorded():
    rng = np.random.default_rng(6)
    n = 8
    u0, _ = sp_data(n, rng)
    g = node_grid(n)
    cfg = SolveConfig(multistart=2)
    alpha0, rep = solve_initial_orientation(ScalarField(g, u0), small_params(), l1(), cfg)
    assert np.isfinite(rep.multistart_spread)
    assert rep.multistart_spread >= 0.0
    base, rep0 = solve_initial_orientation(ScalarField(g, u0), small_params(), l1())
    np.testing.assert_array_equal(alpha0.values, base.values)
    assert rep0.multistart_spread == 0.0


def test_run_rejects_out_of_range_data():
    g = node_grid(6)
    z = ScalarField.zeros(g)
    bad = ScalarField(g, np.full(g.shape, -0.1))
    with pytest.raises(ValueError):
        run(bad, z, small_params(), l1())
    with pytest.raises(ValueError):
        run(z, ScalarField(g, np.full(g.shape, 1.5)), small_params(), l1())
    other = ScalarField.zeros(node_grid(7))
    with pytest.raises(GridMismatchError):
        run(z, other, small_params(), l1())


def test_trajectory_invariants_enforced():
    u0, org, pr, a = bump_instance()
    traj = run(u0, org, pr, a)
    with pytest.raises(ValueError):
        dataclasses.replace(traj, us=traj.us[:-1], alphas=traj.alphas[:-1])
    with pytest.raises(ValueError):
        dataclasses.replace(
            traj,
            alphas=traj.alphas[::-1],
            us=traj.us[::-1],
            reports=traj.reports[::-1],
        )


def test_minimize_step_returns_certified_state():
    rng = np.random.default_rng(61)
    n = 8
    u0, org = sp_data(n, rng)
    g = node_grid(n)
    pr = small_params()
    a = l1()
    alpha0, _ = solve_initial_orientation(ScalarField(g, u0), pr, a)
    alpha1, u1, rep = minimize_step(alpha0, ScalarField(g, u0), ScalarField(g, org), pr, a)
    assert max(rep.res_alpha, rep.res_u) <= rep.tol
    assert rep.ineq_slack >= -ENERGY_SLACK_RTOL * (1.0 + rep.energy_before.total)
    assert rep.energy_after.total <= rep.energy_before.total + 1e-12
    assert u1.grid is g and alpha1.grid is g
