"""Orientation-adaptive anisotropic image denoising.

A coupled elliptic / pseudo-parabolic system is discretized in time by
implicit steps, each solved as an alternating block minimization of a
penalized energy.  The initial orientation field is computed from the
data by minimizing the same energy, not supplied by the user.  Every
step carries machine-checkable certificates: exact-gradient residuals,
an energy-dissipation inequality and a hard range bound on the
intensity.  A theory layer evaluates the published uniqueness and
stability thresholds for concrete inputs.
"""

from .anisotropy import Anisotropy, A2Report, rotate, verify_properties
from .energy import (
    EnergyBreakdown,
    ModelParams,
    StepData,
    energy,
    grad_alpha,
    grad_u_step,
    step_functional,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    EnergyDescentError,
    GridMismatchError,
    MaxPrincipleError,
    NumericError,
    PgmError,
)
from .grid import (
    GridSpec,
    ScalarField,
    VectorField,
    dirichlet_stencil_eigenvalues,
    div,
    grad,
    h1_norm,
    inner_l2,
    laplacian,
    laplacian_eigenvalues,
    lp_integral,
    norm_l2,
    norm_lp,
)
from .pgm import (
    ImageBuffer,
    field_from_image,
    image_from_field,
    load_pgm,
    orientation_image,
    save_pgm,
)
from .solver import (
    ENERGY_SLACK_RTOL,
    MAX_PRINCIPLE_TOL,
    SResiduals,
    SolveConfig,
    StepReport,
    Trajectory,
    minimize_step,
    residuals_S,
    run,
    solve_initial_orientation,
)
from .theory import (
    ConditionReport,
    EmbeddingConstants,
    JTrace,
    TwinRunResult,
    compute_conditions,
    j_functional,
    poincare_rectangle,
    sobolev_h1_lq,
    twin_run,
)
from .config import RunConfig, parse_config

__version__ = "0.1.0"

__all__ = [
    "Anisotropy",
    "A2Report",
    "rotate",
    "verify_properties",
    "EnergyBreakdown",
    "ModelParams",
    "StepData",
    "energy",
    "grad_alpha",
    "grad_u_step",
    "step_functional",
    "ConfigError",
    "ConvergenceError",
    "EnergyDescentError",
    "GridMismatchError",
    "MaxPrincipleError",
    "NumericError",
    "PgmError",
    "GridSpec",
    "ScalarField",
    "VectorField",
    "div",
    "grad",
    "h1_norm",
    "inner_l2",
    "laplacian",
    "laplacian_eigenvalues",
    "dirichlet_stencil_eigenvalues",
    "lp_integral",
    "norm_l2",
    "norm_lp",
    "ImageBuffer",
    "field_from_image",
    "image_from_field",
    "load_pgm",
    "orientation_image",
    "save_pgm",
    "ENERGY_SLACK_RTOL",
    "MAX_PRINCIPLE_TOL",
    "SResiduals",
    "SolveConfig",
    "StepReport",
    "Trajectory",
    "minimize_step",
    "residuals_S",
    "run",
    "solve_initial_orientation",
    "ConditionReport",
    "EmbeddingConstants",
    "JTrace",
    "TwinRunResult",
    "compute_conditions",
    "j_functional",
    "poincare_rectangle",
    "sobolev_h1_lq",
    "twin_run",
    "RunConfig",
    "parse_config",
]
