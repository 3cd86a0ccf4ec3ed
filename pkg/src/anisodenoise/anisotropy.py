"""Smooth convex anisotropy densities and the rotation that steers them.

A density gamma maps a 2-vector w to a nonnegative real with gamma(0) = 0.
It enters the energy as gamma(R(alpha) grad u), so what matters besides
values and gradients is the derivative with respect to the angle,

    d/d(alpha) gamma(R(alpha) w) = grad gamma(R(alpha) w) . R(alpha + pi/2) w,

which follows from dR/d(alpha) = R(alpha + pi/2) for the counterclockwise
rotation R.  Three smoothed one-homogeneous families are provided; each
reports analytic sup bounds for |grad gamma| and the Hessian norm used by
the theory diagnostics.

All evaluation methods broadcast over numpy arrays, so they apply nodewise
to whole gradient fields as well as to single vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Anisotropy", "A2Report", "rotate", "verify_properties", "FAMILIES"]

FAMILIES = ("smoothed-l1", "smoothed-ngon", "smoothed-euclid")


def rotate(angle, wx, wy):
    """Counterclockwise rotation of (wx, wy) by angle; broadcasts."""
    c = np.cos(angle)
    s = np.sin(angle)
    return c * wx - s * wy, s * wx + c * wy


@dataclass(frozen=True)
class Anisotropy:
    """Smoothed convex density gamma with analytic derivative bounds.

    family "smoothed-l1":
        gamma(w) = sum_k sqrt(w_k^2 + eps^2) - eps
    family "smoothed-ngon" (n_dirs = N >= 2, optional per-direction weights):
        gamma(w) = sum_j weight_j (sqrt((n_j . w)^2 + eps^2) - eps),
        n_j = (cos(j pi / N), sin(j pi / N)), j = 0 .. N-1
    family "smoothed-euclid":
        gamma(w) = sqrt(|w|^2 + eps^2) - eps

    eps > 0 is the smoothing parameter.  The subtraction pins gamma(0) = 0.
    """

    family: str
    epsilon: float
    n_dirs: int = 0
    weights: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError("unknown anisotropy family %r" % (self.family,))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if self.family == "smoothed-ngon":
            if self.n_dirs < 2:
                raise ValueError("smoothed-ngon needs n_dirs >= 2")
            w = self.weights if self.weights else (1.0,) * self.n_dirs
            w = tuple(float(x) for x in w)
            if len(w) != self.n_dirs:
                raise ValueError("need one weight per direction")
            if min(w) < 0.0 or max(w) == 0.0:
                raise ValueError("weights must be nonnegative, not all zero")
            object.__setattr__(self, "weights", w)
            ang = np.arange(self.n_dirs) * np.pi / self.n_dirs
            dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
            dirs.setflags(write=False)
            object.__setattr__(self, "_dirs", dirs)
        else:
            if self.n_dirs or self.weights:
                raise ValueError("n_dirs/weights apply to smoothed-ngon only")

    @property
    def grad_bound(self):
        """Analytic sup_w |grad gamma(w)| for this family."""
        if self.family == "smoothed-l1":
            return np.sqrt(2.0)
        if self.family == "smoothed-ngon":
            return float(sum(self.weights))
        return 1.0

    @property
    def hess_bound(self):
        """Analytic sup_w |Hess gamma(w)| (spectral norm), conservative."""
        if self.family == "smoothed-l1":
            return 2.0 / self.epsilon
        if self.family == "smoothed-ngon":
            return float(sum(self.weights)) / self.epsilon
        return 1.0 / self.epsilon

    def value(self, wx, wy):
        """gamma(w), broadcast over arrays."""
        eps = self.epsilon
        if self.family == "smoothed-l1":
            return (
                np.sqrt(wx * wx + eps * eps)
                + np.sqrt(wy * wy + eps * eps)
                - 2.0 * eps
            )
        if self.family == "smoothed-ngon":
            out = 0.0
            for (dx, dy), wt in zip(self._dirs, self.weights):
                s = dx * wx + dy * wy
                out = out + wt * (np.sqrt(s * s + eps * eps) - eps)
            return out
        return np.sqrt(wx * wx + wy * wy + eps * eps) - eps

    def gradient(self, wx, wy):
        """grad gamma(w) as a component pair, broadcast over arrays."""
        eps = self.epsilon
        if self.family == "smoothed-l1":
            return (
                wx / np.sqrt(wx * wx + eps * eps),
                wy / np.sqrt(wy * wy + eps * eps),
            )
        if self.family == "smoothed-ngon":
            gx = 0.0
            gy = 0.0
            for (dx, dy), wt in zip(self._dirs, self.weights):
                s = dx * wx + dy * wy
                r = wt * s / np.sqrt(s * s + eps * eps)
                gx = gx + r * dx
                gy = gy + r * dy
            return gx, gy
        r = 1.0 / np.sqrt(wx * wx + wy * wy + eps * eps)
        return wx * r, wy * r

    def angle_derivative(self, alpha, wx, wy):
        """d/d(alpha) of gamma(R(alpha) w) = grad gamma(R(alpha)w) . R(alpha+pi/2)w."""
        rx, ry = rotate(alpha, wx, wy)
        gx, gy = self.gradient(rx, ry)
        # R(alpha + pi/2) w = (-ry, rx), reusing the rotated components
        return gy * rx - gx * ry


@dataclass(frozen=True)
class A2Report:
    """Sampled check of the standing density assumptions.

    Convexity gap is min over sampled pairs of
    gamma(w2) - gamma(w1) - grad gamma(w1).(w2 - w1); nonnegative for a
    convex density up to rounding.  Lipschitz ratio is max over pairs of
    |grad gamma(w1) - grad gamma(w2)| / (hess_bound |w1 - w2|); at most 1
    when the reported Hessian bound is honest.
    """

    n_samples: int
    value_at_zero: float
    min_value: float
    worst_convexity_gap: float
    max_gradient_norm: float
    grad_bound: float
    worst_lipschitz_ratio: float
    hess_bound: float

    @property
    def nonnegative_ok(self):
        return self.value_at_zero == 0.0 and self.min_value >= -1e-12

    @property
    def convexity_ok(self):
        return self.worst_convexity_gap >= -1e-9

    @property
    def grad_bound_ok(self):
        return self.max_gradient_norm <= self.grad_bound * (1.0 + 1e-12)

    @property
    def lipschitz_ok(self):
        return self.worst_lipschitz_ratio <= 1.0 + 1e-9

    @property
    def all_ok(self):
        return (
            self.nonnegative_ok
            and self.convexity_ok
            and self.grad_bound_ok
            and self.lipschitz_ok
        )


def verify_properties(a: Anisotropy, n_samples=400, seed=0, radius=10.0) -> A2Report:
    """Sample-based verification of convexity, bounds and gradient Lipschitz.

    Draws n_samples vector pairs uniformly in [-radius, radius]^2 with a
    seeded generator and reports the worst observed violations.
    """
    rng = np.random.default_rng(seed)
    w1 = rng.uniform(-radius, radius, size=(n_samples, 2))
    w2 = rng.uniform(-radius, radius, size=(n_samples, 2))

    v1 = a.value(w1[:, 0], w1[:, 1])
    v2 = a.value(w2[:, 0], w2[:, 1])
    g1x, g1y = a.gradient(w1[:, 0], w1[:, 1])
    g2x, g2y = a.gradient(w2[:, 0], w2[:, 1])

    gap = v2 - v1 - (g1x * (w2[:, 0] - w1[:, 0]) + g1y * (w2[:, 1] - w1[:, 1]))
    gnorm = np.sqrt(g1x * g1x + g1y * g1y)
    dg = np.sqrt((g1x - g2x) ** 2 + (g1y - g2y) ** 2)
    dw = np.sqrt(np.sum((w1 - w2) ** 2, axis=1))
    keep = dw > 1e-12
    ratio = dg[keep] / (a.hess_bound * dw[keep])

    return A2Report(
        n_samples=n_samples,
        value_at_zero=float(a.value(0.0, 0.0)),
        min_value=float(min(v1.min(), v2.min())),
        worst_convexity_gap=float(gap.min()),
        max_gradient_norm=float(gnorm.max()),
        grad_bound=a.grad_bound,
        worst_lipschitz_ratio=float(ratio.max()) if ratio.size else 0.0,
        hess_bound=a.hess_bound,
    )
