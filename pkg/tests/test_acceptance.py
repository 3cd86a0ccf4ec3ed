"""End-to-end acceptance checks, one printed summary line per criterion."""

import time

import numpy as np
import pytest

from conftest import (
    ACCEPTANCE_LINES,
    bump_data,
    node_grid,
    ramp_data,
    sp_data,
)
from test_theory import direct_e0_and_lp, transcribe_constants

from anisodenoise import (
    Anisotropy,
    EmbeddingConstants,
    GridSpec,
    ImageBuffer,
    ModelParams,
    ScalarField,
    SolveConfig,
    VectorField,
    compute_conditions,
    div,
    energy,
    grad,
    inner_l2,
    norm_l2,
    run,
    save_pgm,
    solve_initial_orientation,
    twin_run,
)
from anisodenoise.cli import _write_trace_csv
from anisodenoise.cli import main as cli_main


def record(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    ACCEPTANCE_LINES.append("criterion %2d  %-32s %s  %s" % (num, name, status, detail))
    return ok


def l1(eps=0.25):
    return Anisotropy("smoothed-l1", eps)


# Shared 32x32 noisy-bump run for criteria 3 and 4.
@pytest.fixture(scope="module")
def bump32():
    n = 32
    rng = np.random.default_rng(11)
    t = np.arange(1, n + 1) / (n + 1)
    x, y = t[:, None], t[None, :]
    clean = 0.8 * np.exp(-((x - 0.45) ** 2 + (y - 0.55) ** 2) / 0.04)
    u0 = ScalarField(node_grid(n), np.clip(clean + 0.15 * rng.standard_normal((n, n)), 0.0, 1.0))
    params = ModelParams(kappa=1.0, mu=0.5, nu=0.1, lam=20.0, p=3.0, tau=0.01, t_final=0.2)
    t0 = time.perf_counter()
    traj = run(u0, u0, params, l1(), SolveConfig())
    return traj, time.perf_counter() - t0


# Shared 16x16 noisy-bump start for criteria 9 and 10.
def noisy_bump16():
    n = 16
    rng = np.random.default_rng(21)
    t = np.arange(1, n + 1) / (n + 1)
    x, y = t[:, None], t[None, :]
    clean = 0.7 * np.exp(-((x - 0.5) ** 2 + (y - 0.55) ** 2) / 0.05)
    vals = np.clip(clean + 0.1 * rng.standard_normal((n, n)), 0.0, 0.95)
    return ScalarField(node_grid(n), vals)


def test_criterion_01_discrete_adjointness():
    rng = np.random.default_rng(777)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(200):
        nx = int(rng.integers(2, 33))
        ny = int(rng.integers(2, 33))
        if k % 2 == 0:
            g = GridSpec.from_extent(nx, ny, float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0)))
        else:
            g = GridSpec(nx, ny, float(rng.uniform(0.05, 1.5)), float(rng.uniform(0.05, 1.5)))
        f = ScalarField(g, rng.standard_normal(g.shape))
        v = VectorField(g, rng.standard_normal(g.shape), rng.standard_normal(g.shape))
        defect = abs(inner_l2(grad(f), v) + inner_l2(f, div(v)))
        scale = norm_l2(f) * np.sqrt(inner_l2(v, v))
        worst = max(worst, defect / scale)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 5.0
    assert record(1, "discrete adjointness", ok, "worst defect %.2e, %.2fs" % (worst, dt))


def test_criterion_02_gradient_consistency():
    from anisodenoise import StepData, grad_alpha, grad_u_step, step_functional

    rng = np.random.default_rng(4242)
    g = GridSpec.from_extent(8, 8, 1.0, 1.0)
    eps = 1e-6
    ps = (2.5, 3.0, 4.0)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(100):
        p = ps[k % 3]
        fam = ("smoothed-l1", "smoothed-ngon", "smoothed-euclid")[(k // 3) % 3]
        seps = float(rng.uniform(0.1, 0.5))
        if fam == "smoothed-ngon":
            nd = int(rng.integers(2, 6))
            w = tuple(float(x) for x in rng.uniform(0.5, 2.0, size=nd))
            aniso = Anisotropy(fam, seps, n_dirs=nd, weights=w)
        else:
            aniso = Anisotropy(fam, seps)
        tau = float(rng.uniform(0.02, 0.2))
        pr = ModelParams(
            kappa=float(rng.uniform(0.5, 3.0)),
            mu=float(rng.uniform(0.1, 1.0)),
            nu=float(rng.uniform(0.05, 0.5)),
            lam=float(rng.uniform(1.0, 20.0)),
            p=p,
            tau=tau,
            t_final=tau,
        )
        alpha = ScalarField(g, 0.3 * rng.standard_normal(g.shape))
        u = ScalarField(g, rng.random(g.shape))
        step = StepData(
            w_bar=ScalarField(g, u.values + 0.1 * rng.standard_normal(g.shape)),
            u_org=ScalarField(g, rng.random(g.shape)),
        )
        phi = ScalarField(g, rng.standard_normal(g.shape))
        psi = ScalarField(g, rng.standard_normal(g.shape))

        pair = inner_l2(grad_alpha(alpha, u, pr, aniso), phi)
        up = energy(ScalarField(g, alpha.values + eps * phi.values), u, step.u_org, pr, aniso).total
        dn = energy(ScalarField(g, alpha.values - eps * phi.values), u, step.u_org, pr, aniso).total
        worst = max(worst, abs(pair - (up - dn) / (2 * eps)) / max(1.0, abs(pair)))

        pair = inner_l2(grad_u_step(alpha, u, step, pr, aniso), psi)
        up = step_functional(alpha, ScalarField(g, u.values + eps * psi.values), step, pr, aniso)
        dn = step_functional(alpha, ScalarField(g, u.values - eps * psi.values), step, pr, aniso)
        worst = max(worst, abs(pair - (up - dn) / (2 * eps)) / max(1.0, abs(pair)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-5 and dt < 60.0
    assert record(2, "gradient consistency", ok, "worst rel %.2e, %.2fs" % (worst, dt))


def test_criterion_03_per_step_energy_inequality(bump32):
    traj, dt = bump32
    pr, an, org = traj.params, traj.aniso, traj.u_org
    energies = [energy(a, u, org, pr, an).total for a, u in zip(traj.alphas, traj.us)]
    slack_tol = 1e-8 * (1.0 + energies[0])
    worst = np.inf
    for i in range(1, len(traj.us)):
        du = ScalarField(org.grid, traj.us[i].values - traj.us[i - 1].values)
        d2 = norm_l2(du) ** 2 / (2.0 * pr.tau)
        gdu = grad(du)
        dh = pr.mu / (2.0 * pr.tau) * inner_l2(gdu, gdu)
        slack = energies[i - 1] - (energies[i] + d2 + dh)
        worst = min(worst, slack)
        rep = traj.reports[i]
        assert abs(rep.ineq_slack - slack) <= 1e-10 * (1.0 + abs(slack))
        assert abs(rep.dissipation_l2 - d2) + abs(rep.dissipation_h1 - dh) <= 1e-10 * (1.0 + d2 + dh)
    ok = len(traj.us) == 21 and worst >= -slack_tol and dt < 120.0
    assert record(3, "per-step energy inequality", ok, "min slack %+.2e, %.1fs" % (worst, dt))


def test_criterion_04_windowed_descent_from_trace(bump32, tmp_path):
    traj, _ = bump32
    path = tmp_path / "energy_trace.csv"
    _write_trace_csv(str(path), traj.trace_rows())

    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
    totals = [float(r["E_total"]) for r in rows]
    diss = [float(r["diss_l2"]) + float(r["diss_h1"]) for r in rows]
    v = [totals[0]]
    for i in range(1, len(rows)):
        v.append(totals[i] + sum(diss[1 : i + 1]))
    budget = 20.0 * 1e-8 * (1.0 + totals[0])
    worst = max(v[t] - v[s] for s in range(len(v)) for t in range(s + 1, len(v)))
    ok = len(rows) == 21 and worst <= budget
    assert record(4, "windowed descent from trace file", ok, "worst window %+.2e <= %.2e" % (worst, budget))


MAX_PRINCIPLE_CASES = [
    ("sp-l1", 16, "sp", "smoothed-l1", 0.25, {}, 1.0, 0.25, 0.10, 20.0, 3.0, 0.05, 3, 101),
    ("sp-ngon3", 16, "sp", "smoothed-ngon", 0.10, {"n_dirs": 3}, 2.0, 0.50, 0.20, 10.0, 4.0, 0.05, 3, 102),
    ("bump-euclid", 12, "bump", "smoothed-euclid", 0.10, {}, 1.0, 0.20, 0.50, 5.0, 2.5, 0.05, 3, 103),
    ("bump-l1", 16, "bump", "smoothed-l1", 0.50, {}, 1.0, 0.10, 0.10, 20.0, 3.0, 0.05, 3, 104),
    ("sp-euclid", 24, "sp", "smoothed-euclid", 0.25, {}, 1.0, 0.10, 0.10, 30.0, 3.0, 0.02, 3, 105),
    ("bump-ngon4", 16, "bump", "smoothed-ngon", 0.20, {"n_dirs": 4, "weights": (1.0, 2.0, 1.0, 2.0)}, 1.5, 0.30, 0.15, 15.0, 3.0, 0.05, 3, 106),
    ("noise-l1", 16, "noise", "smoothed-l1", 0.25, {}, 1.0, 0.15, 0.05, 25.0, 4.0, 0.03, 3, 107),
    ("sp2-l1", 20, "sp2", "smoothed-l1", 0.30, {}, 2.0, 0.10, 0.10, 10.0, 2.5, 0.04, 3, 108),
    ("ramp-euclid", 16, "ramp", "smoothed-euclid", 0.50, {}, 1.0, 0.20, 0.20, 8.0, 3.0, 0.10, 3, 109),
    ("sp-ngon2", 16, "sp", "smoothed-ngon", 0.15, {"n_dirs": 2}, 1.0, 0.25, 0.10, 20.0, 3.5, 0.05, 3, 110),
]


def test_criterion_05_maximum_principle():
    lo_all, hi_all = 0.0, 1.0
    conv_all = True
    t0 = time.perf_counter()
    for name, n, kind, fam, eps, fkw, kap, mu, nu, lam, p, tau, m, seed in MAX_PRINCIPLE_CASES:
        rng = np.random.default_rng(seed)
        grid = node_grid(n)
        if kind == "sp":
            u0, org = sp_data(n, rng)
        elif kind == "sp2":
            u0, org = sp_data(n, rng, black=0.8, noise=0.05)
        elif kind == "bump":
            u0, org = bump_data(n, rng)
        elif kind == "ramp":
            u0, org = ramp_data(n, rng)
        else:
            u0 = rng.random((n, n))
            org = u0.copy()
        aniso = Anisotropy(fam, eps, **fkw)
        params = ModelParams(kappa=kap, mu=mu, nu=nu, lam=lam, p=p, tau=tau, t_final=m * tau)
        traj = run(ScalarField(grid, u0), ScalarField(grid, org), params, aniso)
        lo = min(float(u.values.min()) for u in traj.us)
        hi = max(float(u.values.max()) for u in traj.us)
        lo_all = min(lo_all, lo)
        hi_all = max(hi_all, hi)
        conv_all = conv_all and all(max(r.res_alpha, r.res_u) <= r.tol for r in traj.reports[1:])
    dt = time.perf_counter() - t0
    ok = lo_all >= -1e-10 and hi_all <= 1.0 + 1e-10 and conv_all
    assert record(
        5, "maximum principle (10 instances)", ok,
        "min %+.1e, max-1 %+.1e, converged %s, %.1fs" % (lo_all, hi_all - 1.0, conv_all, dt),
    )


def test_criterion_06_initial_orientation():
    n = 16
    g = node_grid(n)
    t = np.arange(1, n + 1) / (n + 1)
    u0 = ScalarField(g, np.clip(0.5 * (t[:, None] + t[None, :]), 0.0, 1.0))
    aniso = Anisotropy("smoothed-l1", 0.1)
    cfg = SolveConfig()

    small = ModelParams(kappa=1.0, mu=0.25, nu=0.1, lam=10.0, p=3.0, tau=0.05, t_final=0.05)
    a_small, r_small = solve_initial_orientation(u0, small, aniso, cfg)
    res_ok = r_small.res_alpha <= r_small.tol
    base_val = energy(ScalarField.zeros(g), u0, u0, small, aniso).total
    val_ok = energy(a_small, u0, u0, small, aniso).total <= base_val + 1e-12 * (1.0 + abs(base_val))

    bound = compute_conditions(small, aniso, u0, u0).alpha0_unique_bound
    big = ModelParams(kappa=1.25 * bound, mu=0.25, nu=0.1, lam=10.0, p=3.0, tau=0.05, t_final=0.05)
    a_big, r_big = solve_initial_orientation(u0, big, aniso, cfg)
    res_ok = res_ok and r_big.res_alpha <= r_big.tol
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(8):
        start = ScalarField(g, rng.uniform(-1.5, 1.5, size=g.shape))
        ak, rk = solve_initial_orientation(u0, big, aniso, cfg, initial=start)
        res_ok = res_ok and rk.res_alpha <= rk.tol
        worst = max(worst, norm_l2(ak - a_big))
    ok = res_ok and val_ok and worst <= 1e-6
    assert record(
        6, "initial orientation", ok,
        "residuals ok %s, restart spread %.2e" % (res_ok, worst),
    )


def test_criterion_07_zero_fixed_point():
    g = node_grid(8)
    z = ScalarField.zeros(g)
    params = ModelParams(kappa=1.0, mu=0.5, nu=0.1, lam=20.0, p=3.0, tau=0.1, t_final=0.3)
    traj = run(z, z, params, l1(), SolveConfig())
    zero = np.zeros(g.shape)
    exact = all((a.values == zero).all() and (u.values == zero).all() for a, u in zip(traj.alphas, traj.us))
    trace_zero = all(
        row["E_total"] == 0.0 and row["diss_l2"] == 0.0 and row["diss_h1"] == 0.0
        for row in traj.trace_rows()
    )
    ok = exact and trace_zero and len(traj.us) == 4
    assert record(7, "zero fixed point", ok, "states and trace identically zero: %s" % ok)


def test_criterion_08_threshold_constants():
    keys = ("c1", "c1_proof", "c2", "c2_proof", "kappa_hat", "kappa_hat_proof", "tau_hat", "alpha0_unique_bound")
    worst = 0.0

    def compare(rep, ref):
        w = 0.0
        for k in keys:
            got, want = getattr(rep, k), ref[k]
            w = max(w, abs(got - want) / max(1e-300, abs(want)) if want != 0.0 else abs(got))
        return w

    # worked case: unit embeddings, unit gamma bound, zero image
    g = node_grid(6)
    z = ScalarField.zeros(g)
    emb1 = EmbeddingConstants(1.0, 1.0, 1.0)
    pw = ModelParams(kappa=200.0, mu=1.0, nu=0.5, lam=1.0, p=4.0, tau=0.05, t_final=0.05)
    rep = compute_conditions(pw, l1(), z, z, emb=emb1, gamma_w1inf=1.0)
    ref = transcribe_constants(emb1, 1.0, pw.p, pw.mu, pw.nu, 0.0, 0.0)
    worst = max(worst, compare(rep, ref))
    root2 = np.sqrt(2.0)
    worked_ok = (
        abs(rep.kappa_hat - 128.0 * root2) <= 1e-12 * 128.0 * root2
        and abs(rep.alpha0_unique_bound - 64.0 * root2) <= 1e-12 * 64.0 * root2
        and abs(rep.tau_hat - 128.0 * root2 / (4.0 * 54.0 * 4.0 * 4.0 * (1.0 + 256.0 * root2)))
        <= 1e-12 * rep.tau_hat
        and rep.kappa_ok
    )

    # randomized set with default embeddings
    rng = np.random.default_rng(71)
    u0v, orgv = sp_data(10, rng)
    u0, org = ScalarField(node_grid(10), u0v), ScalarField(node_grid(10), orgv)
    pa = ModelParams(kappa=5.0, mu=0.5, nu=0.2, lam=10.0, p=3.0, tau=0.05, t_final=0.1)
    aniso = l1()
    rep = compute_conditions(pa, aniso, u0, org)
    e0, np4 = direct_e0_and_lp(u0, org, pa, aniso)
    emb = EmbeddingConstants(rep.c_poincare, rep.c_sob_1, rep.c_sob_2)
    ref = transcribe_constants(emb, rep.gamma_w1inf, pa.p, pa.mu, pa.nu, e0, np4)
    worst = max(worst, compare(rep, ref))

    # user-supplied embeddings and gamma bound
    rng = np.random.default_rng(5)
    u0v, orgv = bump_data(12, rng)
    u0, org = ScalarField(node_grid(12), u0v), ScalarField(node_grid(12), orgv)
    pb = ModelParams(kappa=2.0, mu=0.3, nu=0.4, lam=6.0, p=4.0, tau=0.02, t_final=0.04)
    anb = Anisotropy("smoothed-ngon", 0.5, n_dirs=3)
    embb = EmbeddingConstants(0.7, 1.2, 1.1)
    rep = compute_conditions(pb, anb, u0, org, emb=embb, gamma_w1inf=2.5)
    e0, np4 = direct_e0_and_lp(u0, org, pb, anb)
    ref = transcribe_constants(embb, 2.5, pb.p, pb.mu, pb.nu, e0, np4)
    worst = max(worst, compare(rep, ref))

    ok = worst <= 1e-12 and worked_ok
    assert record(8, "threshold constants", ok, "worst rel dev %.2e, worked case %s" % (worst, worked_ok))


def test_criterion_09_perturbation_scaling():
    u0 = noisy_bump16()
    aniso = l1()
    base = ModelParams(kappa=1.0, mu=0.25, nu=0.1, lam=20.0, p=3.0, tau=0.05, t_final=0.25)
    rep = compute_conditions(base, aniso, u0, u0)
    kap = float(np.ceil(rep.kappa_hat * 1.05))
    assert kap > rep.kappa_hat
    params = ModelParams(kappa=kap, mu=0.25, nu=0.1, lam=20.0, p=3.0, tau=0.05, t_final=0.25)

    g = u0.grid
    bx, by = g.node_coords()
    a, b = g.extent
    mode = np.sin(np.pi * bx / a) * np.sin(np.pi * by / b)
    mode /= np.abs(mode).max()

    t0 = time.perf_counter()
    deltas = (1e-2, 1e-3, 1e-4)
    j0s, ratios = [], []
    for delta in deltas:
        pert = u0.values + delta * mode
        assert pert.min() >= 0.0 and pert.max() <= 1.0
        res = twin_run(u0, ScalarField(g, pert), u0, params, aniso, SolveConfig())
        j0s.append(res.jtrace.j0)
        ratios.append(res.stability_ratio)
    dt = time.perf_counter() - t0
    slope = float(np.polyfit(np.log(deltas), np.log(j0s), 1)[0])
    spread = max(ratios) / min(ratios)
    ok = abs(slope - 2.0) <= 0.1 and spread <= 4.0 and dt < 600.0
    assert record(
        9, "perturbation scaling", ok,
        "J(0) slope %.4f, sup-ratio spread x%.2f, %.1fs" % (slope, spread, dt),
    )


def test_criterion_10_time_step_refinement():
    u0 = noisy_bump16()
    aniso = l1()
    T = 0.2
    finals = {}
    for m in (5, 10, 20):
        params = ModelParams(kappa=1.0, mu=0.25, nu=0.1, lam=20.0, p=3.0, tau=T / m, t_final=T)
        finals[m] = run(u0, u0, params, aniso, SolveConfig()).us[-1]
    gaps = (norm_l2(finals[5] - finals[10]), norm_l2(finals[10] - finals[20]))
    ok = gaps[1] < gaps[0] < 0.1
    assert record(10, "time-step refinement", ok, "gaps %.3e > %.3e" % gaps)


def test_criterion_11_cli_reproducibility(tmp_path, capsys):
    rng = np.random.default_rng(101)
    u0, org = sp_data(16, rng)
    save_pgm(ImageBuffer.from_array(u0.T), tmp_path / "u0.pgm")
    save_pgm(ImageBuffer.from_array(org.T), tmp_path / "org.pgm")
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "kappa = 1.0\nmu = 0.25\nnu = 0.1\nlambda = 20.0\np = 3.0\n"
        "tau = 0.05\nt_final = 0.15\nfamily = smoothed-l1\nepsilon = 0.25\n"
        "input = %s\nu0 = %s\n" % (tmp_path / "org.pgm", tmp_path / "u0.pgm")
    )
    payloads = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        rc = cli_main(["denoise", "--config", str(cfg), "--output-dir", str(out)])
        assert rc == 0
        payloads.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    identical = payloads[0] == payloads[1]
    self_rc = cli_main(["selftest"])
    capsys.readouterr()
    ok = identical and self_rc == 0 and len(payloads[0]) == 5
    assert record(
        11, "CLI reproducibility", ok,
        "byte-identical %s, selftest exit %d" % (identical, self_rc),
    )
