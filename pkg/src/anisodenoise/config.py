"""Run configuration: a flat key = value file mapped onto the typed pieces.

Lines hold `key = value`; '#' starts a comment; blank lines are ignored.
Unknown keys are rejected so typos fail loudly.  Validation failures cite
the standing assumption they violate:

  (A0) positive model weights, p > 2, t_final/tau an integral step count
  (A1) the datum image takes values in [0, 1]
  (A2) an admissible anisotropy family (eps > 0, usable directions/weights)
  (A3) the initial intensity is admissible and matches the datum grid

Example:

    # model
    kappa = 1.0
    mu = 0.5
    nu = 0.1
    lambda = 20.0
    p = 3.0
    tau = 0.05
    t_final = 0.5

    family = smoothed-l1
    epsilon = 0.25

    input = noisy.pgm
    output_dir = out
"""

from __future__ import annotations

from dataclasses import dataclass

from .anisotropy import Anisotropy
from .energy import ModelParams
from .errors import ConfigError
from .solver import SolveConfig
from .theory import EmbeddingConstants

__all__ = ["RunConfig", "parse_config", "parse_config_text"]

_MODEL_KEYS = ("kappa", "mu", "nu", "lambda", "p", "tau", "t_final")
_ANISO_KEYS = ("family", "epsilon", "n_dirs", "weights")
_SOLVER_KEYS = (
    "tol_res",
    "max_outer",
    "max_inner",
    "armijo_c",
    "backtrack",
    "init_step",
    "precondition",
    "multistart",
    "multistart_seed",
)
_EMBED_KEYS = ("c_poincare", "c_sob_1", "c_sob_2", "gamma_w1inf")
_IO_KEYS = ("input", "u0", "output_dir", "maxval")
_ALL_KEYS = _MODEL_KEYS + _ANISO_KEYS + _SOLVER_KEYS + _EMBED_KEYS + _IO_KEYS


@dataclass(frozen=True)
class RunConfig:
    """Everything one command needs: model, density, solver, paths."""

    params: ModelParams
    aniso: Anisotropy
    solve: SolveConfig
    embeddings: EmbeddingConstants  # None -> defaults from the grid rectangle
    gamma_w1inf: float  # None -> from the density bounds
    input: str
    u0_path: str  # None -> u0 equals the datum
    output_dir: str
    maxval: int


def _parse_lines(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("line %d: expected 'key = value'" % lineno)
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _ALL_KEYS:
            raise ConfigError("line %d: unknown key %r" % (lineno, key))
        if key in values:
            raise ConfigError("line %d: duplicate key %r" % (lineno, key))
        if not val:
            raise ConfigError("line %d: empty value for %r" % (lineno, key))
        values[key] = val
    return values


def _get_float(values, key, assumption):
    if key not in values:
        raise ConfigError("missing key %r (%s)" % (key, assumption))
    try:
        return float(values[key])
    except ValueError:
        raise ConfigError(
            "key %r: %r is not a number (%s)" % (key, values[key], assumption)
        ) from None


def _get_int(values, key, default):
    if key not in values:
        return default
    try:
        return int(values[key])
    except ValueError:
        raise ConfigError("key %r: %r is not an integer" % (key, values[key])) from None


def _get_bool(values, key, default):
    if key not in values:
        return default
    v = values[key].lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ConfigError("key %r: %r is not a boolean" % (key, values[key]))


def parse_config_text(text) -> RunConfig:
    values = _parse_lines(text)

    model_kwargs = {}
    for key in _MODEL_KEYS:
        name = "lam" if key == "lambda" else key
        model_kwargs[name] = _get_float(values, key, "(A0)")
    try:
        params = ModelParams(**model_kwargs)
    except ValueError as exc:
        raise ConfigError("invalid model parameters: %s (A0)" % exc) from None

    if "family" not in values:
        raise ConfigError("missing key 'family' (A2)")
    weights = ()
    if "weights" in values:
        try:
            weights = tuple(
                float(tok) for tok in values["weights"].replace(",", " ").split()
            )
        except ValueError:
            raise ConfigError(
                "key 'weights': expected numbers, got %r (A2)" % values["weights"]
            ) from None
    try:
        aniso = Anisotropy(
            family=values["family"],
            epsilon=_get_float(values, "epsilon", "(A2)"),
            n_dirs=_get_int(values, "n_dirs", 0),
            weights=weights,
        )
    except ValueError as exc:
        raise ConfigError("invalid anisotropy: %s (A2)" % exc) from None

    try:
        solve = SolveConfig(
            tol_res=_get_float(values, "tol_res", "(A0)") if "tol_res" in values else 1e-8,
            max_outer=_get_int(values, "max_outer", 200),
            max_inner=_get_int(values, "max_inner", 500),
            armijo_c=_get_float(values, "armijo_c", "(A0)") if "armijo_c" in values else 1e-4,
            backtrack=_get_float(values, "backtrack", "(A0)") if "backtrack" in values else 0.5,
            init_step=_get_float(values, "init_step", "(A0)") if "init_step" in values else 1.0,
            precondition=_get_bool(values, "precondition", True),
            multistart=_get_int(values, "multistart", 0),
            multistart_seed=_get_int(values, "multistart_seed", 12345),
        )
    except ValueError as exc:
        raise ConfigError("invalid solver settings: %s" % exc) from None

    embeddings = None
    if any(k in values for k in ("c_poincare", "c_sob_1", "c_sob_2")):
        for k in ("c_poincare", "c_sob_1", "c_sob_2"):
            if k not in values:
                raise ConfigError(
                    "embedding constants must be given together; missing %r" % k
                )
        try:
            embeddings = EmbeddingConstants(
                c_poincare=_get_float(values, "c_poincare", "(A0)"),
                c_sob_1=_get_float(values, "c_sob_1", "(A0)"),
                c_sob_2=_get_float(values, "c_sob_2", "(A0)"),
            )
        except ValueError as exc:
            raise ConfigError("invalid embedding constants: %s" % exc) from None

    gamma_w1inf = None
    if "gamma_w1inf" in values:
        gamma_w1inf = _get_float(values, "gamma_w1inf", "(A2)")
        if not gamma_w1inf > 0.0:
            raise ConfigError("gamma_w1inf must be positive (A2)")

    if "input" not in values:
        raise ConfigError("missing key 'input' (A1)")
    maxval = _get_int(values, "maxval", 255)
    if not 1 <= maxval <= 65535:
        raise ConfigError("maxval must lie in [1, 65535]")

    return RunConfig(
        params=params,
        aniso=aniso,
        solve=solve,
        embeddings=embeddings,
        gamma_w1inf=gamma_w1inf,
        input=values["input"],
        u0_path=values.get("u0"),
        output_dir=values.get("output_dir", "out"),
        maxval=maxval,
    )


def parse_config(path) -> RunConfig:
    """Read and validate a config file; see the module docstring for keys."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_config_text(text)
    except ConfigError as exc:
        raise ConfigError("%s: %s" % (path, exc)) from None
