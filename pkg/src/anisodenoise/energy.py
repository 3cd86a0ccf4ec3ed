"""The denoising energy, the per-step functional and their exact gradients.

For an orientation field alpha and an intensity field u on the same grid,

    E(alpha, u) = kappa/2 |grad alpha|^2
                + nu/p  sum |grad u|^p h^2
                + sum gamma(R(alpha) grad u) h^2
                + lam/2 |u - u_org|^2,

all integrals by nodewise quadrature.  One implicit time step of length
tau from the previous intensity w minimizes the strictly penalized

    Psi_w(alpha, u) = E(alpha, u) + 1/(2 tau) |u - w|^2
                    + mu/(2 tau) |grad(u - w)|^2.

Because the divergence is the exact negative adjoint of the gradient and
the quadrature is collocated at the nodes, grad_alpha and grad_u_step
below are the exact L2 gradients of E and Psi on the discrete grid (not
discretizations of continuum optimality conditions), so finite difference
checks hold to rounding-limited accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .anisotropy import Anisotropy, rotate
from .grid import (
    GridSpec,
    ScalarField,
    div_arrays,
    ensure_same_grid,
    grad_arrays,
)

__all__ = [
    "ModelParams",
    "StepData",
    "EnergyBreakdown",
    "energy",
    "alpha_objective",
    "step_functional",
    "grad_alpha",
    "grad_u_step",
]


@dataclass(frozen=True)
class ModelParams:
    """Model weights and the time discretization.

    kappa   orientation smoothness weight
    mu      gradient penalty weight of the time stepping
    nu      p-Laplace regularization weight
    lam     fidelity weight (lambda; renamed, keyword)
    p       p-Laplace exponent, must exceed 2
    tau     step length
    t_final horizon; t_final / tau must be integral (the step count m)
    """

    kappa: float
    mu: float
    nu: float
    lam: float
    p: float
    tau: float
    t_final: float
    m: int = field(init=False)

    def __post_init__(self):
        for name in ("kappa", "mu", "nu", "lam", "p", "tau", "t_final"):
            object.__setattr__(self, name, float(getattr(self, name)))
            if not getattr(self, name) > 0.0:
                raise ValueError("%s must be positive" % name)
        if not self.p > 2.0:
            raise ValueError("p must be greater than 2, got %g" % self.p)
        ratio = self.t_final / self.tau
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(
                "t_final/tau = %r is not an integral step count" % ratio
            )
        object.__setattr__(self, "m", int(round(ratio)))


@dataclass(frozen=True, eq=False)
class StepData:
    """Previous intensity w_bar and the noisy datum u_org for one step."""

    w_bar: ScalarField
    u_org: ScalarField

    def __post_init__(self):
        ensure_same_grid(self.w_bar, self.u_org)
        v = self.u_org.values
        if v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("u_org must take values in [0, 1]")


@dataclass(frozen=True)
class EnergyBreakdown:
    """The four energy components; total is their sum in fixed order."""

    dirichlet_alpha: float
    p_term: float
    aniso_term: float
    fidelity: float

    @property
    def total(self):
        return self.dirichlet_alpha + self.p_term + self.aniso_term + self.fidelity


def _grad_pair(values, grid):
    return grad_arrays(values, grid.hx, grid.hy)


def energy(
    alpha: ScalarField,
    u: ScalarField,
    u_org: ScalarField,
    params: ModelParams,
    aniso: Anisotropy,
) -> EnergyBreakdown:
    """Evaluate E(alpha, u) against the datum u_org, component by component."""
    g = ensure_same_grid(alpha, u, u_org)
    area = g.cell_area

    gax, gay = _grad_pair(alpha.values, g)
    dirichlet = 0.5 * params.kappa * (np.sum(gax * gax) + np.sum(gay * gay)) * area

    gux, guy = _grad_pair(u.values, g)
    mag2 = gux * gux + guy * guy
    p_term = (params.nu / params.p) * np.sum(mag2 ** (params.p / 2.0)) * area

    rx, ry = rotate(alpha.values, gux, guy)
    aniso_term = np.sum(aniso.value(rx, ry)) * area

    diff = u.values - u_org.values
    fidelity = 0.5 * params.lam * np.sum(diff * diff) * area

    return EnergyBreakdown(float(dirichlet), float(p_term), float(aniso_term), float(fidelity))


def alpha_objective(
    alpha: ScalarField,
    u: ScalarField,
    params: ModelParams,
    aniso: Anisotropy,
) -> float:
    """The alpha-dependent part of E: Dirichlet term plus anisotropy term."""
    g = ensure_same_grid(alpha, u)
    area = g.cell_area
    gax, gay = _grad_pair(alpha.values, g)
    gux, guy = _grad_pair(u.values, g)
    rx, ry = rotate(alpha.values, gux, guy)
    return float(
        0.5 * params.kappa * (np.sum(gax * gax) + np.sum(gay * gay)) * area
        + np.sum(aniso.value(rx, ry)) * area
    )


def step_functional(
    alpha: ScalarField,
    u: ScalarField,
    step: StepData,
    params: ModelParams,
    aniso: Anisotropy,
) -> float:
    """Psi_w(alpha, u): energy plus the L2 and gradient step penalties."""
    g = ensure_same_grid(alpha, u, step.w_bar)
    area = g.cell_area
    e = energy(alpha, u, step.u_org, params, aniso)
    d = u.values - step.w_bar.values
    pen_l2 = np.sum(d * d) * area
    dx, dy = _grad_pair(d, g)
    pen_h1 = (np.sum(dx * dx) + np.sum(dy * dy)) * area
    return e.total + 0.5 / params.tau * pen_l2 + 0.5 * params.mu / params.tau * pen_h1


def grad_alpha(
    alpha: ScalarField,
    u: ScalarField,
    params: ModelParams,
    aniso: Anisotropy,
) -> ScalarField:
    """Exact L2 gradient of E in alpha: -kappa lap(alpha) + angle derivative."""
    g = ensure_same_grid(alpha, u)
    gax, gay = _grad_pair(alpha.values, g)
    lap = div_arrays(gax, gay, g.hx, g.hy)
    gux, guy = _grad_pair(u.values, g)
    coupling = aniso.angle_derivative(alpha.values, gux, guy)
    return ScalarField(g, -params.kappa * lap + coupling)


def grad_u_step(
    alpha: ScalarField,
    u: ScalarField,
    step: StepData,
    params: ModelParams,
    aniso: Anisotropy,
) -> ScalarField:
    """Exact L2 gradient of Psi_w in u.

    (u - w)/tau - div( R(alpha)^T grad gamma(R(alpha) grad u)
                       + nu |grad u|^(p-2) grad u
                       + mu/tau grad(u - w) )
    + lam (u - u_org)
    """
    g = ensure_same_grid(alpha, u, step.w_bar, step.u_org)
    av = alpha.values
    gux, guy = _grad_pair(u.values, g)

    rx, ry = rotate(av, gux, guy)
    ggx, ggy = aniso.gradient(rx, ry)
    fx, fy = rotate(-av, ggx, ggy)

    mag_pm2 = (gux * gux + guy * guy) ** ((params.p - 2.0) / 2.0)
    fx = fx + params.nu * mag_pm2 * gux
    fy = fy + params.nu * mag_pm2 * guy

    d = u.values - step.w_bar.values
    dx, dy = _grad_pair(d, g)
    c = params.mu / params.tau
    fx = fx + c * dx
    fy = fy + c * dy

    divergence = div_arrays(fx, fy, g.hx, g.hy)
    out = d / params.tau - divergence + params.lam * (u.values - step.u_org.values)
    return ScalarField(g, out)
