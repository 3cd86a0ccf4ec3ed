"""Command line front end.

Subcommands:

  denoise           full run: orientation init + m implicit steps
  init-orientation  only the orientation solve for the input image
  check-conditions  evaluate the uniqueness/stability thresholds
  twin-run          two runs from a perturbed start, J trace + ratio
  selftest          built-in invariant checks

Exit codes: 0 success, 1 validation/configuration error, 2 solver
failure (non-convergence, range violation, numeric breakdown), 3 I/O or
file format error.  All outputs are written atomically and are
byte-deterministic for a fixed config and inputs: no timestamps, fixed
17-significant-digit scientific notation in tables.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import RunConfig, parse_config
from .diagnostics import run_selftest
from .errors import (
    ConfigError,
    ConvergenceError,
    EnergyDescentError,
    MaxPrincipleError,
    NumericError,
    PgmError,
)
from .pgm import (
    atomic_write_text,
    field_from_image,
    image_from_field,
    load_pgm,
    orientation_image,
    save_pgm,
)
from .solver import run, solve_initial_orientation
from .theory import compute_conditions, twin_run

__all__ = ["main"]

_TRACE_COLUMNS = (
    "step",
    "t",
    "E_alpha",
    "E_p",
    "E_aniso",
    "E_fid",
    "E_total",
    "diss_l2",
    "diss_h1",
    "ineq_slack",
    "res_alpha",
    "res_u",
)


def _fmt(x) -> str:
    """Fixed 17-significant-digit scientific notation."""
    return "%.16e" % float(x)


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _fmt(v)
    if isinstance(v, int):
        return "%d" % v
    return str(v)


def _load_fields(rc: RunConfig):
    """(u0, u_org) from the configured images; names the assumption on failure."""
    u_org = field_from_image(load_pgm(rc.input))
    if rc.u0_path is None:
        return u_org, u_org
    u0 = field_from_image(load_pgm(rc.u0_path))
    if u0.grid != u_org.grid:
        raise ConfigError(
            "u0 image size %s does not match the datum %s (A3)"
            % (u0.grid.shape, u_org.grid.shape)
        )
    return u0, u_org


def _write_trace_csv(path, rows):
    lines = [",".join(_TRACE_COLUMNS)]
    for row in rows:
        cells = ["%d" % row["step"]]
        cells += [_fmt(row[c]) for c in _TRACE_COLUMNS[1:]]
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _write_orientation(alpha, stem, out_dir, maxval):
    img, lo, hi = orientation_image(alpha)
    save_pgm(img, os.path.join(out_dir, stem + ".pgm"), maxval=maxval)
    atomic_write_text(
        os.path.join(out_dir, stem + ".range.txt"),
        "alpha_min = %s\nalpha_max = %s\n" % (_fmt(lo), _fmt(hi)),
    )


def _describe_setup(rc: RunConfig, grid):
    p = rc.params
    a = rc.aniso
    lines = [
        "input = %s" % rc.input,
        "u0 = %s" % (rc.u0_path if rc.u0_path else "(datum)"),
        "grid = %d x %d, hx = %s, hy = %s" % (grid.nx, grid.ny, _fmt(grid.hx), _fmt(grid.hy)),
        "family = %s, epsilon = %s" % (a.family, _fmt(a.epsilon)),
    ]
    if a.family == "smoothed-ngon":
        lines.append(
            "n_dirs = %d, weights = %s" % (a.n_dirs, " ".join(_fmt(w) for w in a.weights))
        )
    lines.append(
        "kappa = %s, mu = %s, nu = %s, lambda = %s, p = %s"
        % (_fmt(p.kappa), _fmt(p.mu), _fmt(p.nu), _fmt(p.lam), _fmt(p.p))
    )
    lines.append("tau = %s, t_final = %s, steps = %d" % (_fmt(p.tau), _fmt(p.t_final), p.m))
    return lines


def _cmd_denoise(args) -> int:
    rc = parse_config(args.config)
    u0, u_org = _load_fields(rc)
    traj = run(u0, u_org, rc.params, rc.aniso, rc.solve)

    out = args.output_dir or rc.output_dir
    os.makedirs(out, exist_ok=True)
    save_pgm(image_from_field(traj.us[-1]), os.path.join(out, "u_final.pgm"), maxval=rc.maxval)
    _write_orientation(traj.alphas[-1], "alpha_final", out, rc.maxval)
    _write_trace_csv(os.path.join(out, "energy_trace.csv"), traj.trace_rows())

    first = traj.reports[0]
    last = traj.reports[-1]
    lines = ["command = denoise"]
    lines += _describe_setup(rc, traj.grid)
    lines += [
        "initial orientation: res_alpha = %s, sweeps = %d"
        % (_fmt(first.res_alpha), first.outer_sweeps),
        "final residuals: res_alpha = %s, res_u = %s, tol = %s"
        % (_fmt(last.res_alpha), _fmt(last.res_u), _fmt(last.tol)),
        "energy: %s -> %s"
        % (_fmt(first.energy_after.total), _fmt(last.energy_after.total)),
        "total dissipation: l2 = %s, h1 = %s"
        % (
            _fmt(sum(r.dissipation_l2 for r in traj.reports)),
            _fmt(sum(r.dissipation_h1 for r in traj.reports)),
        ),
        "min ineq_slack = %s" % _fmt(min(r.ineq_slack for r in traj.reports)),
        "intensity range = [%s, %s]"
        % (_fmt(traj.us[-1].values.min()), _fmt(traj.us[-1].values.max())),
        "outputs = u_final.pgm, alpha_final.pgm, alpha_final.range.txt, energy_trace.csv",
    ]
    atomic_write_text(os.path.join(out, "run_report.txt"), "\n".join(lines) + "\n")
    print("denoise: %d steps, energy %s -> %s, outputs in %s"
          % (rc.params.m, _fmt(first.energy_after.total), _fmt(last.energy_after.total), out))
    return 0


def _cmd_init_orientation(args) -> int:
    rc = parse_config(args.config)
    u0, _ = _load_fields(rc)
    alpha0, report = solve_initial_orientation(u0, rc.params, rc.aniso, rc.solve)

    out = args.output_dir or rc.output_dir
    os.makedirs(out, exist_ok=True)
    _write_orientation(alpha0, "alpha0", out, rc.maxval)
    lines = ["command = init-orientation"]
    lines += _describe_setup(rc, u0.grid)
    lines += [
        "res_alpha = %s, tol = %s, sweeps = %d"
        % (_fmt(report.res_alpha), _fmt(report.tol), report.outer_sweeps),
        "alpha range = [%s, %s]"
        % (_fmt(alpha0.values.min()), _fmt(alpha0.values.max())),
    ]
    if rc.solve.multistart > 0:
        lines.append(
            "multistart spread (%d restarts) = %s"
            % (rc.solve.multistart, _fmt(report.multistart_spread))
        )
    atomic_write_text(os.path.join(out, "alpha0_report.txt"), "\n".join(lines) + "\n")
    print("init-orientation: res_alpha = %s, outputs in %s" % (_fmt(report.res_alpha), out))
    return 0


def _cmd_check_conditions(args) -> int:
    rc = parse_config(args.config)
    u0, u_org = _load_fields(rc)
    report = compute_conditions(
        rc.params, rc.aniso, u0, u_org, emb=rc.embeddings, gamma_w1inf=rc.gamma_w1inf
    )

    out = args.output_dir or rc.output_dir
    os.makedirs(out, exist_ok=True)
    rows = report.rows()
    atomic_write_text(
        os.path.join(out, "conditions.txt"),
        "".join("%s = %s\n" % (k, _fmt_value(v)) for k, v in rows),
    )
    atomic_write_text(
        os.path.join(out, "conditions.csv"),
        "name,value\n" + "".join("%s,%s\n" % (k, _fmt_value(v)) for k, v in rows),
    )
    print(
        "check-conditions: kappa_ok = %s (kappa_hat = %s), tau_ok = %s (tau_hat = %s)"
        % (
            _fmt_value(report.kappa_ok),
            _fmt(report.kappa_hat),
            _fmt_value(report.tau_ok),
            _fmt(report.tau_hat),
        )
    )
    return 0


def _cmd_twin_run(args) -> int:
    rc = parse_config(args.config)
    delta = float(args.perturb)
    if not delta > 0.0:
        raise ConfigError("--perturb must be positive")
    u0, u_org = _load_fields(rc)

    # first Dirichlet eigenmode scaled to sup norm delta, then clipped
    x, y = u0.grid.node_coords()
    a, b = u0.grid.extent
    bump = np.sin(np.pi * x / a) * np.sin(np.pi * y / b)
    bump /= np.abs(bump).max()
    perturbed = u0.values + delta * bump
    clipped = bool((perturbed < 0.0).any() or (perturbed > 1.0).any())
    u0_b = type(u0)(u0.grid, np.clip(perturbed, 0.0, 1.0))

    result = twin_run(u0, u0_b, u_org, rc.params, rc.aniso, rc.solve)
    conditions = compute_conditions(
        rc.params, rc.aniso, u0, u_org, emb=rc.embeddings, gamma_w1inf=rc.gamma_w1inf
    )

    out = args.output_dir or rc.output_dir
    os.makedirs(out, exist_ok=True)
    tr = result.jtrace
    lines = ["step,t,J,alpha_gap"]
    for i, (t, v, ag) in enumerate(zip(tr.times, tr.j_values, tr.alpha_gap)):
        lines.append("%d,%s,%s,%s" % (i, _fmt(t), _fmt(v), _fmt(ag)))
    atomic_write_text(os.path.join(out, "jtrace.csv"), "\n".join(lines) + "\n")

    lines = ["command = twin-run"]
    lines += _describe_setup(rc, u0.grid)
    lines += [
        "perturb = %s (first eigenmode, sup-norm scaled)" % _fmt(delta),
        "perturbation clipped to [0,1] = %s" % _fmt_value(clipped),
        "J(0) = %s" % _fmt(tr.j0),
        "max J = %s" % _fmt(float(tr.j_values.max())),
        "max alpha gap = %s" % _fmt(float(tr.alpha_gap.max())),
        "sup ratio = %s" % _fmt(result.stability_ratio),
        "kappa_ok = %s (kappa_hat = %s)"
        % (_fmt_value(conditions.kappa_ok), _fmt(conditions.kappa_hat)),
        "stability certificate: %s"
        % (
            "kappa condition satisfied; bounded growth expected"
            if conditions.kappa_ok
            else "kappa condition NOT satisfied; no contraction guarantee"
        ),
    ]
    atomic_write_text(os.path.join(out, "twin_report.txt"), "\n".join(lines) + "\n")
    print(
        "twin-run: J(0) = %s, sup ratio = %s, outputs in %s"
        % (_fmt(tr.j0), _fmt(result.stability_ratio), out)
    )
    return 0


def _cmd_selftest(args) -> int:
    return 0 if run_selftest(print) else 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser():
    parser = _Parser(prog="anisodenoise", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, helptext, needs_config=True):
        p = sub.add_parser(name, help=helptext)
        if needs_config:
            p.add_argument("--config", required=True, help="key = value config file")
            p.add_argument(
                "--output-dir", default=None, help="override the configured output_dir"
            )
        p.set_defaults(func=fn)
        return p

    add("denoise", _cmd_denoise, "orientation init plus m implicit steps")
    add("init-orientation", _cmd_init_orientation, "only the orientation solve")
    add("check-conditions", _cmd_check_conditions, "uniqueness/stability thresholds")
    twin = add("twin-run", _cmd_twin_run, "perturbed twin runs and their J trace")
    twin.add_argument("--perturb", required=True, type=float, help="sup-norm size of the perturbation")
    add("selftest", _cmd_selftest, "run the built-in invariant checks", needs_config=False)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except PgmError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3
    except (ConfigError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except (ConvergenceError, NumericError, MaxPrincipleError, EnergyDescentError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
