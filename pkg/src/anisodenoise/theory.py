"""Well-posedness conditions, embedding constants and twin-run stability.

The uniqueness and stability guarantees for the scheme come with explicit
constants built from a Poincare constant, two Sobolev embedding constants
for H1 into L^(2p/(p-2)) and L^(2p/(p-1)), the W^(1,inf) size of the
density gradient, and the initial energy.  The published closed forms
exist in two slightly different shapes (a headline form and the form the
derivation actually uses); both are computed and labeled rather than
silently merged.  Threshold booleans compare against the headline forms.

Sobolev constants have no standard exact value on a rectangle; by default
a conservative Gagliardo-Nirenberg style surrogate (q/2)^(1-2/q) is used
and labeled as such in the report.  Pass explicit EmbeddingConstants (or
a gamma_w1inf override) to reproduce hand-computed scenarios.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anisotropy import Anisotropy
from .energy import ModelParams, energy
from .grid import ScalarField, ensure_same_grid, grad, inner_l2, norm_lp
from .solver import SolveConfig, Trajectory, run

__all__ = [
    "EmbeddingConstants",
    "ConditionReport",
    "JTrace",
    "TwinRunResult",
    "poincare_rectangle",
    "sobolev_h1_lq",
    "compute_conditions",
    "j_functional",
    "twin_run",
]


def poincare_rectangle(a, b) -> float:
    """Sharp Poincare constant of (0, a) x (0, b).

    |f|_L2 <= C_P |grad f|_L2 with C_P = 1 / sqrt(pi^2 (1/a^2 + 1/b^2)),
    the reciprocal square root of the first Dirichlet eigenvalue.
    """
    a = float(a)
    b = float(b)
    if not (a > 0.0 and b > 0.0):
        raise ValueError("side lengths must be positive")
    return 1.0 / np.sqrt(np.pi**2 * (1.0 / a**2 + 1.0 / b**2))


def sobolev_h1_lq(q) -> float:
    """Default surrogate constant for H1_0 -> L^q on a unit-scale domain.

    (q/2)^(1-2/q): equals 1 at q = 2 and grows slowly; a conservative
    stand-in where no sharp rectangle value is available.  Override via
    EmbeddingConstants for exact scenarios.
    """
    q = float(q)
    if q < 2.0:
        raise ValueError("q must be at least 2")
    return (q / 2.0) ** (1.0 - 2.0 / q)


@dataclass(frozen=True)
class EmbeddingConstants:
    """Poincare and the two H1 -> L^q embedding constants (q from p)."""

    c_poincare: float
    c_sob_1: float  # H1 -> L^(2p/(p-2))
    c_sob_2: float  # H1 -> L^(2p/(p-1))

    def __post_init__(self):
        for name in ("c_poincare", "c_sob_1", "c_sob_2"):
            object.__setattr__(self, name, float(getattr(self, name)))
            if not getattr(self, name) > 0.0:
                raise ValueError("%s must be positive" % name)

    @classmethod
    def defaults(cls, a, b, p):
        """Poincare constant of the rectangle plus surrogate Sobolev values."""
        p = float(p)
        if not p > 2.0:
            raise ValueError("p must exceed 2")
        return cls(
            c_poincare=poincare_rectangle(a, b),
            c_sob_1=sobolev_h1_lq(2.0 * p / (p - 2.0)),
            c_sob_2=sobolev_h1_lq(2.0 * p / (p - 1.0)),
        )


@dataclass(frozen=True)
class ConditionReport:
    """Computed thresholds plus every input that went into them.

    c1/kappa_hat are the headline uniqueness thresholds for the
    orientation weight (per step at the given gradient norm, resp. along
    the whole flow from the initial energy); the _proof variants are the
    shapes used inside the derivations ((1+|grad u|)^2 form, and the
    energy bound entering through ((p/nu) E0)^(1/p)).  c2/tau_hat bound
    the admissible step length.  kappa_ok and tau_ok compare the model
    parameters against kappa_hat and tau_hat.
    """

    kappa: float
    tau: float
    mu: float
    nu: float
    p: float
    c_poincare: float
    c_sob_1: float
    c_sob_2: float
    gamma_w1inf: float
    e0_total: float
    grad_u0_lp: float
    c1: float
    c1_proof: float
    c2: float
    c2_proof: float
    kappa_hat: float
    kappa_hat_proof: float
    tau_hat: float
    kappa_ok: bool
    tau_ok: bool
    alpha0_unique_bound: float
    embeddings_source: str

    def rows(self):
        """(name, value) pairs in a fixed order, for text and CSV output."""
        out = []
        for name in (
            "kappa",
            "tau",
            "mu",
            "nu",
            "p",
            "c_poincare",
            "c_sob_1",
            "c_sob_2",
            "gamma_w1inf",
            "e0_total",
            "grad_u0_lp",
            "c1",
            "c1_proof",
            "c2",
            "c2_proof",
            "kappa_hat",
            "kappa_hat_proof",
            "tau_hat",
            "kappa_ok",
            "tau_ok",
            "alpha0_unique_bound",
            "embeddings_source",
        ):
            out.append((name, getattr(self, name)))
        return out


def compute_conditions(
    params: ModelParams,
    aniso: Anisotropy,
    u0: ScalarField,
    u_org: ScalarField,
    emb: EmbeddingConstants = None,
    gamma_w1inf: float = None,
) -> ConditionReport:
    """Evaluate the uniqueness/stability thresholds for a concrete setup.

    gamma_w1inf defaults to grad_bound + hess_bound of the density (the
    sum of the two sup norms); pass a value to pin it.  emb defaults to
    EmbeddingConstants.defaults on the grid's rectangle.
    """
    g = ensure_same_grid(u0, u_org)
    source = "user"
    if emb is None:
        a, b = g.extent
        emb = EmbeddingConstants.defaults(a, b, params.p)
        source = "default-surrogate"
    if gamma_w1inf is None:
        gam = aniso.grad_bound + aniso.hess_bound
    else:
        gam = float(gamma_w1inf)
        if not gam > 0.0:
            raise ValueError("gamma_w1inf must be positive")

    p = params.p
    e0 = energy(ScalarField.zeros(g), u0, u_org, params, aniso).total
    np4 = norm_lp(grad(u0), p)

    sob = (emb.c_sob_1 + emb.c_sob_2) ** 2
    poi = (1.0 + emb.c_poincare) ** 2
    root2 = np.sqrt(2.0)

    c1 = 4.0 * root2 * sob * poi * gam * np4**2
    c1_proof = 4.0 * root2 * sob * poi * gam * (1.0 + np4) ** 2

    def step_bound(c):
        num = c * min(1.0, params.mu)
        den = (
            (1.0 + gam) ** 2
            * (1.0 + np4) ** 2
            * 54.0
            * poi
            * (1.0 + emb.c_sob_1) ** 2
            * (1.0 + 2.0 * c)
        )
        return num / den

    c2 = step_bound(c1)
    c2_proof = step_bound(c1_proof)

    kappa_hat = 8.0 * root2 * sob * poi * gam * (1.0 + (params.nu / p) * e0) ** (2.0 / p)
    kappa_hat_proof = (
        8.0 * root2 * sob * poi * gam * (1.0 + ((p / params.nu) * e0) ** (1.0 / p)) ** 2
    )
    flow_grad = (1.0 + ((params.nu / p) * e0) ** (1.0 / p)) ** 2
    tau_hat = (
        kappa_hat
        * min(1.0, params.mu)
        / (
            (1.0 + gam) ** 2
            * flow_grad
            * 54.0
            * poi
            * (1.0 + emb.c_sob_1) ** 2
            * (1.0 + 2.0 * kappa_hat)
        )
    )

    alpha0_unique = 4.0 * root2 * (1.0 + np4) ** 2 * poi * sob * gam

    return ConditionReport(
        kappa=params.kappa,
        tau=params.tau,
        mu=params.mu,
        nu=params.nu,
        p=p,
        c_poincare=emb.c_poincare,
        c_sob_1=emb.c_sob_1,
        c_sob_2=emb.c_sob_2,
        gamma_w1inf=gam,
        e0_total=e0,
        grad_u0_lp=np4,
        c1=float(c1),
        c1_proof=float(c1_proof),
        c2=float(c2),
        c2_proof=float(c2_proof),
        kappa_hat=float(kappa_hat),
        kappa_hat_proof=float(kappa_hat_proof),
        tau_hat=float(tau_hat),
        kappa_ok=bool(params.kappa > kappa_hat),
        tau_ok=bool(params.tau < tau_hat),
        alpha0_unique_bound=float(alpha0_unique),
        embeddings_source=source,
    )


@dataclass(frozen=True, eq=False)
class JTrace:
    """J(t_i) = |u_a - u_b|_L2^2 + mu |grad(u_a - u_b)|_L2^2 at step times.

    alpha_gap carries |grad(alpha_a - alpha_b)|_L2^2 per step alongside.
    """

    times: np.ndarray
    j_values: np.ndarray
    alpha_gap: np.ndarray
    mu: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        v = np.asarray(self.j_values, dtype=np.float64)
        a = np.asarray(self.alpha_gap, dtype=np.float64)
        if t.shape != v.shape or t.shape != a.shape or t.ndim != 1:
            raise ValueError("times, j_values and alpha_gap must be matching vectors")
        if (v < 0.0).any() or (a < 0.0).any():
            raise ValueError("squared gap values must be nonnegative")
        for name, arr in (("times", t), ("j_values", v), ("alpha_gap", a)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def j0(self):
        return float(self.j_values[0])

    @property
    def sup_ratio(self):
        """sup_i J(t_i) / J(0); 0 for identical trajectories."""
        if self.j0 == 0.0:
            return 0.0
        return float(self.j_values.max() / self.j0)


def j_functional(traj_a: Trajectory, traj_b: Trajectory) -> JTrace:
    """Squared H1-type distance of two trajectories at their step times."""
    if traj_a.params != traj_b.params:
        raise ValueError("trajectories were produced with different parameters")
    ensure_same_grid(traj_a.u_org, traj_b.u_org)
    mu = traj_a.params.mu
    j_values = []
    alpha_gap = []
    for ua, ub in zip(traj_a.us, traj_b.us):
        d = ua - ub
        gd = grad(d)
        j_values.append(inner_l2(d, d) + mu * inner_l2(gd, gd))
    for aa, ab in zip(traj_a.alphas, traj_b.alphas):
        ga = grad(aa - ab)
        alpha_gap.append(inner_l2(ga, ga))
    return JTrace(
        times=traj_a.times,
        j_values=np.array(j_values),
        alpha_gap=np.array(alpha_gap),
        mu=mu,
    )


@dataclass(frozen=True, eq=False)
class TwinRunResult:
    """Two runs from perturbed initial intensities plus their J trace."""

    traj_a: Trajectory
    traj_b: Trajectory
    jtrace: JTrace

    @property
    def stability_ratio(self):
        return self.jtrace.sup_ratio


def twin_run(
    u0_a: ScalarField,
    u0_b: ScalarField,
    u_org: ScalarField,
    params: ModelParams,
    aniso: Anisotropy,
    cfg: SolveConfig = None,
) -> TwinRunResult:
    """Run the scheme from two initial intensities against one datum.

    The runs are independent and deterministic; the J trace quantifies how
    the initial separation propagates.  Under the kappa threshold the
    continuous theory gives a Gronwall bound, so the sup ratio staying
    O(1) is the observable certificate.
    """
    ensure_same_grid(u0_a, u0_b, u_org)
    traj_a = run(u0_a, u_org, params, aniso, cfg)
    traj_b = run(u0_b, u_org, params, aniso, cfg)
    return TwinRunResult(traj_a=traj_a, traj_b=traj_b, jtrace=j_functional(traj_a, traj_b))
