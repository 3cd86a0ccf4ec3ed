"""Uniform rectangular grids with zero Dirichlet boundary and discrete calculus.

Fields store interior node values only.  The boundary of the rectangle
(0, a) x (0, b) is implicit and identically zero: every stencil read
outside the interior returns 0.  Node (i, j) sits at ((i+1) hx, (j+1) hy),
so a = (nx+1) hx and b = (ny+1) hy.

The gradient uses forward differences and the divergence uses backward
differences, both with zero padding.  With the plain nodewise quadrature
inner product this makes the divergence exactly the negative adjoint of
the gradient,

    <grad f, v> + <f, div v> = 0  (up to rounding),

and laplacian = div(grad(.)) is the classical 5-point stencil.  All
reductions go through numpy's pairwise summation, so results are
deterministic for a fixed input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError

__all__ = [
    "GridSpec",
    "ScalarField",
    "VectorField",
    "grad",
    "div",
    "laplacian",
    "inner_l2",
    "norm_l2",
    "lp_integral",
    "norm_lp",
    "h1_norm",
    "laplacian_eigenvalues",
    "dirichlet_stencil_eigenvalues",
    "ensure_same_grid",
]


@dataclass(frozen=True)
class GridSpec:
    """Interior node counts and spacings of a uniform rectangular grid."""

    nx: int
    ny: int
    hx: float
    hy: float

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("node counts must be integers")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "hx", float(self.hx))
        object.__setattr__(self, "hy", float(self.hy))
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one interior node per axis")
        if not (self.hx > 0.0 and self.hy > 0.0):
            raise ValueError("grid spacings must be positive")

    @classmethod
    def from_extent(cls, nx, ny, a, b):
        """Grid for the rectangle (0, a) x (0, b) with nx * ny interior nodes."""
        return cls(nx, ny, a / (nx + 1), b / (ny + 1))

    @property
    def extent(self):
        """Side lengths (a, b) of the rectangle."""
        return ((self.nx + 1) * self.hx, (self.ny + 1) * self.hy)

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def cell_area(self):
        return self.hx * self.hy

    def node_coords(self):
        """Coordinate arrays (X, Y) of the interior nodes, shape (nx, ny)."""
        x = (np.arange(self.nx) + 1.0) * self.hx
        y = (np.arange(self.ny) + 1.0) * self.hy
        return np.meshgrid(x, y, indexing="ij")


def _prepare(grid, values, name):
    v = np.asarray(values, dtype=np.float64)
    if v.shape != grid.shape:
        raise ValueError(
            "%s values have shape %s, expected %s" % (name, v.shape, grid.shape)
        )
    if not np.isfinite(v).all():
        raise ValueError("%s values must be finite" % name)
    if v.base is not None or v.flags.writeable:
        v = v.copy()
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values on the interior nodes; values[i, j] lives at ((i+1)hx, (j+1)hy)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _prepare(self.grid, self.values, "field"))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def full(cls, grid, value):
        return cls(grid, np.full(grid.shape, float(value)))

    def __add__(self, other):
        _same_grid(self, other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Two-component field on the interior nodes (same layout as ScalarField)."""

    grid: GridSpec
    vx: np.ndarray
    vy: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vx", _prepare(self.grid, self.vx, "vx"))
        object.__setattr__(self, "vy", _prepare(self.grid, self.vy, "vy"))

    @classmethod
    def zeros(cls, grid):
        z = np.zeros(grid.shape)
        return cls(grid, z, z.copy())

    def __add__(self, other):
        _same_grid(self, other)
        return VectorField(self.grid, self.vx + other.vx, self.vy + other.vy)

    def __sub__(self, other):
        _same_grid(self, other)
        return VectorField(self.grid, self.vx - other.vx, self.vy - other.vy)

    def __mul__(self, c):
        c = float(c)
        return VectorField(self.grid, self.vx * c, self.vy * c)

    __rmul__ = __mul__


def ensure_same_grid(*fields):
    """Raise GridMismatchError unless all fields share one GridSpec."""
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatchError(
                "fields live on different grids: %s vs %s" % (g, f.grid)
            )
    return g


_same_grid = ensure_same_grid


def grad_arrays(values, hx, hy):
    """Forward-difference gradient of a raw value array, zero Dirichlet reads."""
    gx = np.empty_like(values)
    gx[:-1, :] = values[1:, :] - values[:-1, :]
    gx[-1, :] = -values[-1, :]
    gx /= hx
    gy = np.empty_like(values)
    gy[:, :-1] = values[:, 1:] - values[:, :-1]
    gy[:, -1] = -values[:, -1]
    gy /= hy
    return gx, gy


def div_arrays(vx, vy, hx, hy):
    """Backward-difference divergence of raw component arrays, zero padding."""
    d = np.empty_like(vx)
    d[0, :] = vx[0, :]
    d[1:, :] = vx[1:, :] - vx[:-1, :]
    d /= hx
    dy = np.empty_like(vy)
    dy[:, 0] = vy[:, 0]
    dy[:, 1:] = vy[:, 1:] - vy[:, :-1]
    dy /= hy
    d += dy
    return d


def grad(f: ScalarField) -> VectorField:
    """Discrete gradient; exact negative adjoint of div."""
    gx, gy = grad_arrays(f.values, f.grid.hx, f.grid.hy)
    return VectorField(f.grid, gx, gy)


def div(v: VectorField) -> ScalarField:
    """Discrete divergence; exact negative adjoint of grad."""
    return ScalarField(v.grid, div_arrays(v.vx, v.vy, v.grid.hx, v.grid.hy))


def laplacian(f: ScalarField) -> ScalarField:
    """div(grad(f)); the 5-point stencil with zero Dirichlet reads."""
    return div(grad(f))


def inner_l2(f, g) -> float:
    """L2 inner product, nodewise quadrature: sum(f * g) * hx * hy.

    Accepts a pair of ScalarFields or a pair of VectorFields (componentwise
    sum in the vector case).
    """
    _same_grid(f, g)
    if isinstance(f, VectorField):
        s = np.sum(f.vx * g.vx) + np.sum(f.vy * g.vy)
    else:
        s = np.sum(f.values * g.values)
    return float(s) * f.grid.cell_area


def norm_l2(f) -> float:
    return np.sqrt(inner_l2(f, f))


def lp_integral(v, p) -> float:
    """Integral sum |v|^p hx hy; |.| is the pointwise Euclidean magnitude.

    Reduces to inner_l2(v, v) for p = 2.  Not the norm; see norm_lp for
    the rooted variant.
    """
    p = float(p)
    if p < 1.0:
        raise ValueError("p must be >= 1, got %g" % p)
    if isinstance(v, VectorField):
        mag2 = v.vx * v.vx + v.vy * v.vy
        s = np.sum(mag2) if p == 2.0 else np.sum(mag2 ** (p / 2.0))
    else:
        s = np.sum(np.abs(v.values) ** p)
    return float(s) * v.grid.cell_area


def norm_lp(v, p) -> float:
    """L^p norm, lp_integral(v, p) ** (1/p)."""
    return lp_integral(v, p) ** (1.0 / float(p))


def h1_norm(f: ScalarField) -> float:
    """sqrt(|f|_L2^2 + |grad f|_L2^2)."""
    g = grad(f)
    return np.sqrt(inner_l2(f, f) + inner_l2(g, g))


def laplacian_eigenvalues(grid: GridSpec):
    """Eigenvalues of -laplacian (the composite -div(grad(.))) split by axis.

    The one-sided difference pair reads the zero boundary only on the
    high-index side of each axis, so per axis the composite is the mixed
    chain with eigenvalues lx[k] = (4/hx^2) sin^2((2k+1) pi / (2(2 nx+1)));
    the full spectrum is lx[k] + ly[l].  lx[0] + ly[0] is the smallest
    eigenvalue and hence the sharp constant in the discrete Poincare
    inequality |f|^2 <= (1/lambda_min) |grad f|^2 for this gradient.
    """
    kx = 2.0 * np.arange(grid.nx) + 1.0
    ky = 2.0 * np.arange(grid.ny) + 1.0
    lx = (4.0 / grid.hx**2) * np.sin(np.pi * kx / (2.0 * (2 * grid.nx + 1))) ** 2
    ly = (4.0 / grid.hy**2) * np.sin(np.pi * ky / (2.0 * (2 * grid.ny + 1))) ** 2
    return lx, ly


def dirichlet_stencil_eigenvalues(grid: GridSpec):
    """Eigenvalues of the classical 5-point zero-Dirichlet stencil by axis.

    Returns (lx, ly) with lx[k] = (4/hx^2) sin^2(pi (k+1) hx / (2 a)); the
    eigenvectors are the product sine modes, so the type-I sine transform
    diagonalizes this stencil exactly (the preconditioner relies on that).
    lx[0] + ly[0] increases toward the first continuum Dirichlet eigenvalue
    pi^2 (1/a^2 + 1/b^2) from below under grid refinement.  This is not
    the spectrum of laplacian(): the composite div(grad(.)) sees the zero
    boundary only from the high-index side of each axis.
    """
    a, b = grid.extent
    kx = np.arange(1, grid.nx + 1)
    ky = np.arange(1, grid.ny + 1)
    lx = (4.0 / grid.hx**2) * np.sin(np.pi * kx * grid.hx / (2.0 * a)) ** 2
    ly = (4.0 / grid.hy**2) * np.sin(np.pi * ky * grid.hy / (2.0 * b)) ** 2
    return lx, ly
