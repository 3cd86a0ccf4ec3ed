"""Built-in invariant checks behind the selftest command.

These duplicate, in compact form, the core guarantees: exactness of the
discrete adjoint pair, exactness of the implemented gradients against
central finite differences, the zero fixed point of the stepper, the
density assumptions, and a bit-exact image roundtrip.  Everything is
seeded and deterministic.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

from .anisotropy import Anisotropy, verify_properties
from .energy import ModelParams, StepData, energy, grad_alpha, grad_u_step, step_functional
from .grid import GridSpec, ScalarField, VectorField, div, grad, inner_l2
from .pgm import ImageBuffer, load_pgm, save_pgm
from .solver import SolveConfig, minimize_step

__all__ = ["run_selftest"]

_FAMILIES = (
    Anisotropy("smoothed-l1", epsilon=0.3),
    Anisotropy("smoothed-ngon", epsilon=0.3, n_dirs=3, weights=(1.0, 0.5, 0.25)),
    Anisotropy("smoothed-euclid", epsilon=0.3),
)


def _check_adjointness(n_pairs=40, seed=2024):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        nx = int(rng.integers(2, 17))
        ny = int(rng.integers(2, 17))
        g = GridSpec.from_extent(nx, ny, float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0)))
        f = ScalarField(g, rng.standard_normal(g.shape))
        v = VectorField(g, rng.standard_normal(g.shape), rng.standard_normal(g.shape))
        lhs = inner_l2(grad(f), v) + inner_l2(f, div(v))
        scale = np.sqrt(inner_l2(f, f)) * np.sqrt(inner_l2(v, v))
        worst = max(worst, abs(lhs) / max(scale, 1e-300))
    return worst <= 1e-12, "adjointness worst relative defect %.3e" % worst


def _check_gradients(seed=77, eps=1e-6, tol=1e-5):
    rng = np.random.default_rng(seed)
    g = GridSpec.from_extent(6, 5, 1.0, 1.0)
    worst = 0.0
    for aniso in _FAMILIES:
        params = ModelParams(kappa=0.8, mu=0.6, nu=0.4, lam=2.0, p=3.0, tau=0.1, t_final=0.1)
        alpha = ScalarField(g, rng.uniform(-1.0, 1.0, g.shape))
        u = ScalarField(g, rng.uniform(0.0, 1.0, g.shape))
        w = ScalarField(g, rng.uniform(0.0, 1.0, g.shape))
        u_org = ScalarField(g, rng.uniform(0.0, 1.0, g.shape))
        step = StepData(w_bar=w, u_org=u_org)
        d = rng.standard_normal(g.shape)

        def fd(fn, x):
            return (fn(x + eps * d) - fn(x - eps * d)) / (2.0 * eps)

        predicted = inner_l2(grad_alpha(alpha, u, params, aniso), ScalarField(g, d))
        observed = fd(
            lambda a: energy(ScalarField(g, a), u, u_org, params, aniso).total,
            alpha.values,
        )
        worst = max(worst, abs(predicted - observed) / max(abs(observed), 1e-12))

        predicted = inner_l2(grad_u_step(alpha, u, step, params, aniso), ScalarField(g, d))
        observed = fd(
            lambda z: step_functional(alpha, ScalarField(g, z), step, params, aniso),
            u.values,
        )
        worst = max(worst, abs(predicted - observed) / max(abs(observed), 1e-12))
    return worst <= tol, "gradient check worst relative error %.3e" % worst


def _check_zero_fixed_point():
    g = GridSpec.from_extent(8, 8, 1.0, 1.0)
    zero = ScalarField.zeros(g)
    params = ModelParams(kappa=1.0, mu=1.0, nu=0.5, lam=3.0, p=3.0, tau=0.1, t_final=0.1)
    aniso = Anisotropy("smoothed-l1", epsilon=0.2)
    alpha, u, report = minimize_step(zero, zero, zero, params, aniso, SolveConfig())
    exact = (alpha.values == 0.0).all() and (u.values == 0.0).all()
    return bool(exact), "zero data fixed point exact: %s" % exact


def _check_density_assumptions():
    worst = None
    for aniso in _FAMILIES:
        report = verify_properties(aniso, n_samples=300, seed=5)
        if not report.all_ok:
            return False, "density assumptions failed for %s" % aniso.family
        worst = report
    return True, "density assumptions hold (last convexity gap %.3e)" % worst.worst_convexity_gap


def _check_pgm_roundtrip():
    rng = np.random.default_rng(9)
    img = ImageBuffer.from_array(rng.integers(0, 256, size=(7, 5)) / 255.0)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "roundtrip.pgm")
        save_pgm(img, path, maxval=255)
        back = load_pgm(path)
        save_pgm(back, path + ".2", maxval=255)
        with open(path, "rb") as fh:
            first = fh.read()
        with open(path + ".2", "rb") as fh:
            second = fh.read()
    ok = np.array_equal(img.intensities, back.intensities) and first == second
    return bool(ok), "pgm roundtrip bit-exact: %s" % ok


def run_selftest(print_fn=print) -> bool:
    """Run all built-in checks; prints one line per check, returns overall."""
    checks = (
        ("adjointness", _check_adjointness),
        ("gradients", _check_gradients),
        ("zero-fixed-point", _check_zero_fixed_point),
        ("density-assumptions", _check_density_assumptions),
        ("pgm-roundtrip", _check_pgm_roundtrip),
    )
    all_ok = True
    for name, fn in checks:
        ok, detail = fn()
        all_ok = all_ok and ok
        print_fn("%s %-20s %s" % ("ok  " if ok else "FAIL", name, detail))
    print_fn("selftest: %s" % ("all checks passed" if all_ok else "FAILURES present"))
    return all_ok
