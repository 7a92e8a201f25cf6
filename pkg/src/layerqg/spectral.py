"""Dirichlet sine eigenbasis of a rectangle, transforms, and norms.

The basis functions on D = (0, Lx) x (0, Ly) are

    e_{n,m}(x, y) = (2 / sqrt(Lx Ly)) sin(n pi x / Lx) sin(m pi y / Ly)

for 1 <= n <= Nx, 1 <= m <= Ny, with Dirichlet-Laplacian eigenvalues
lambda_{n,m} = pi^2 (n^2/Lx^2 + m^2/Ly^2).  The quadrature grid carries
the boundary: points x_j = j Lx/(Gx+1), j = 0..Gx+1, with trapezoid
weights.  That rule integrates every cosine mode up to 2G+1 exactly, so
products of two band-limited fields (cosine content <= 2N) are integrated
exactly whenever G >= N, and triple products whenever G >= 2N.  The grid
floor G >= 2N is enforced so the quadratic transport product is alias-free
and cubic pairings are still exact.

Spectral coefficient arrays have shape (..., Nx, Ny); grid arrays have
shape (..., Gx+2, Gy+2).  Layer fields carry a leading axis of length 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.fft import dct, dst, dstn

from .errors import ConfigurationError, ShapeError, UnsupportedExponentError

N_LAYERS = 3


@dataclass(frozen=True)
class SpectralBasis:
    """Immutable transform plan for one rectangle and mode cut."""

    lx: float
    ly: float
    nx: int
    ny: int
    gx: int
    gy: int

    def __post_init__(self):
        for name in ("lx", "ly"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        for name in ("nx", "ny", "gx", "gy"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be a positive integer")
        if self.gx < 2 * self.nx:
            raise ConfigurationError(
                "gx must satisfy gx >= 2*nx (dealiasing constraint)")
        if self.gy < 2 * self.ny:
            raise ConfigurationError(
                "gy must satisfy gy >= 2*ny (dealiasing constraint)")

    @property
    def spectral_shape(self):
        return (self.nx, self.ny)

    @property
    def grid_shape(self):
        return (self.gx + 2, self.gy + 2)

    @cached_property
    def hx(self):
        return self.lx / (self.gx + 1)

    @cached_property
    def hy(self):
        return self.ly / (self.gy + 1)

    @cached_property
    def xs(self):
        return np.arange(self.gx + 2) * self.hx

    @cached_property
    def ys(self):
        return np.arange(self.gy + 2) * self.hy

    @cached_property
    def kx(self):
        """Derivative factors n pi / Lx, shape (Nx, 1)."""
        return (np.arange(1, self.nx + 1) * np.pi / self.lx)[:, None]

    @cached_property
    def ky(self):
        """Derivative factors m pi / Ly, shape (1, Ny)."""
        return (np.arange(1, self.ny + 1) * np.pi / self.ly)[None, :]

    @cached_property
    def eigenvalues(self):
        """lambda_{n,m} = pi^2 (n^2/Lx^2 + m^2/Ly^2), shape (Nx, Ny)."""
        return self.kx**2 + self.ky**2

    @cached_property
    def quad_weights(self):
        """Trapezoid weights on the full grid, shape (Gx+2, Gy+2)."""
        wx = np.full(self.gx + 2, self.hx)
        wx[0] = wx[-1] = self.hx / 2
        wy = np.full(self.gy + 2, self.hy)
        wy[0] = wy[-1] = self.hy / 2
        return np.outer(wx, wy)

    # -- transforms ---------------------------------------------------

    def _check_grid(self, values):
        if values.shape[-2:] != self.grid_shape:
            raise ShapeError(
                f"grid shape {values.shape[-2:]} != {self.grid_shape}")

    def _check_spectral(self, coeffs):
        if coeffs.shape[-2:] != self.spectral_shape:
            raise ShapeError(
                f"spectral shape {coeffs.shape[-2:]} != {self.spectral_shape}")

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Grid samples -> coefficients on the retained modes.

        Exact (no aliasing) whenever the sampled function is a sine
        polynomial of band <= G in each direction.
        """
        self._check_grid(values)
        interior = values[..., 1:-1, 1:-1]
        raw = dstn(interior, type=1, axes=(-2, -1))
        scale = np.sqrt(self.lx * self.ly) / (2 * (self.gx + 1) * (self.gy + 1))
        return raw[..., : self.nx, : self.ny] * scale

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        """Coefficients -> samples on the full grid (boundary rows zero)."""
        self._check_spectral(coeffs)
        pad = np.zeros(coeffs.shape[:-2] + (self.gx, self.gy))
        pad[..., : self.nx, : self.ny] = coeffs
        interior = dstn(pad, type=1, axes=(-2, -1)) / (2 * np.sqrt(self.lx * self.ly))
        out = np.zeros(coeffs.shape[:-2] + self.grid_shape)
        out[..., 1:-1, 1:-1] = interior
        return out

    # Raw trig synthesis: input arrays hold plain trig-sum coefficients
    # (the caller folds in basis normalization and derivative factors).

    def _sin_axis(self, c, g, axis):
        n = c.shape[axis]
        shape = list(c.shape)
        shape[axis] = g
        buf = np.zeros(shape)
        sl = [slice(None)] * c.ndim
        sl[axis] = slice(0, n)
        buf[tuple(sl)] = c
        vals = dst(buf, type=1, axis=axis, overwrite_x=True)
        shape[axis] = g + 2
        out = np.zeros(shape)
        sl[axis] = slice(1, g + 1)
        out[tuple(sl)] = vals
        out *= 0.5
        return out

    def _cos_axis(self, c, g, axis):
        n = c.shape[axis]
        shape = list(c.shape)
        shape[axis] = g + 2
        buf = np.zeros(shape)
        sl = [slice(None)] * c.ndim
        sl[axis] = slice(1, n + 1)
        buf[tuple(sl)] = c
        return dct(buf, type=1, axis=axis, overwrite_x=True) / 2

    def synth_ss(self, c):
        return self._sin_axis(self._sin_axis(c, self.gx, -2), self.gy, -1)

    def synth_cs(self, c):
        return self._sin_axis(self._cos_axis(c, self.gx, -2), self.gy, -1)

    def synth_sc(self, c):
        return self._cos_axis(self._sin_axis(c, self.gx, -2), self.gy, -1)

    def synth_cc(self, c):
        return self._cos_axis(self._cos_axis(c, self.gx, -2), self.gy, -1)

    @cached_property
    def _norm_factor(self):
        return 2.0 / np.sqrt(self.lx * self.ly)

    def grad_grids(self, coeffs):
        """(d/dx f, d/dy f) on the grid from sine coefficients."""
        self._check_spectral(coeffs)
        fx = self.synth_cs(coeffs * self.kx * self._norm_factor)
        fy = self.synth_sc(coeffs * self.ky * self._norm_factor)
        return fx, fy

    def perp_grad_grids(self, coeffs):
        """grad^perp f = (-d/dy f, d/dx f) on the grid."""
        fx, fy = self.grad_grids(coeffs)
        return -fy, fx

    def hessian_grids(self, coeffs):
        """(f_xx, f_xy, f_yy) on the grid from sine coefficients."""
        self._check_spectral(coeffs)
        nf = self._norm_factor
        fxx = -self.synth_ss(coeffs * self.kx**2 * nf)
        fxy = self.synth_cc(coeffs * self.kx * self.ky * nf)
        fyy = -self.synth_ss(coeffs * self.ky**2 * nf)
        return fxx, fxy, fyy

    def integrate(self, grid_values):
        """Trapezoid quadrature over D; extra leading axes are summed."""
        self._check_grid(grid_values)
        return float(np.sum(grid_values * self.quad_weights))

    def compatible(self, other: "SpectralBasis") -> bool:
        return (self.lx, self.ly, self.nx, self.ny, self.gx, self.gy) == (
            other.lx, other.ly, other.nx, other.ny, other.gx, other.gy)


def build_basis(lx, ly, nx, ny, gx=None, gy=None) -> SpectralBasis:
    """Construct the basis; G defaults to the dealiasing floor 2N."""
    gx = 2 * nx if gx is None else gx
    gy = 2 * ny if gy is None else gy
    return SpectralBasis(lx=float(lx), ly=float(ly), nx=int(nx), ny=int(ny),
                         gx=int(gx), gy=int(gy))


def basis_function(basis: SpectralBasis, n: int, m: int) -> np.ndarray:
    """Spectral coefficients of e_{n,m} as a single-layer array."""
    if not (1 <= n <= basis.nx and 1 <= m <= basis.ny):
        raise ShapeError(f"mode ({n},{m}) outside retained band")
    c = np.zeros(basis.spectral_shape)
    c[n - 1, m - 1] = 1.0
    return c


@dataclass(frozen=True)
class LayerField:
    """A 3-layer scalar field in spectral and/or grid representation.

    At least one representation must be present; conversions return
    arrays and never mutate the field.
    """

    basis: SpectralBasis
    coeffs: np.ndarray | None = None
    grid: np.ndarray | None = None

    def __post_init__(self):
        if self.coeffs is None and self.grid is None:
            raise ShapeError("LayerField needs a spectral or grid array")
        if self.coeffs is not None:
            if self.coeffs.shape != (N_LAYERS,) + self.basis.spectral_shape:
                raise ShapeError(f"coeffs shape {self.coeffs.shape} invalid")
            if not np.all(np.isfinite(self.coeffs)):
                raise ShapeError("non-finite spectral coefficients")
        if self.grid is not None:
            if self.grid.shape != (N_LAYERS,) + self.basis.grid_shape:
                raise ShapeError(f"grid shape {self.grid.shape} invalid")

    @classmethod
    def from_coeffs(cls, basis, coeffs):
        return cls(basis=basis, coeffs=np.asarray(coeffs, dtype=float))

    @classmethod
    def from_grid(cls, basis, grid):
        return cls(basis=basis, grid=np.asarray(grid, dtype=float))

    @classmethod
    def zero(cls, basis):
        return cls(basis=basis,
                   coeffs=np.zeros((N_LAYERS,) + basis.spectral_shape))

    def spectral(self) -> np.ndarray:
        if self.coeffs is not None:
            return self.coeffs
        return self.basis.forward(self.grid)

    def values(self) -> np.ndarray:
        if self.grid is not None:
            return self.grid
        return self.basis.inverse(self.coeffs)


def single_mode_field(basis, n, m, layer_amplitudes) -> LayerField:
    """LayerField supported on the single spatial mode (n, m)."""
    amps = np.asarray(layer_amplitudes, dtype=float)
    if amps.shape != (N_LAYERS,):
        raise ShapeError("need one amplitude per layer")
    c = np.zeros((N_LAYERS,) + basis.spectral_shape)
    c[:, n - 1, m - 1] = amps
    return LayerField.from_coeffs(basis, c)


# -- norms ------------------------------------------------------------


def _as_layer_grid(field: LayerField) -> np.ndarray:
    return field.values()


def lp_norm(field: LayerField, p) -> float:
    """(sum_i int_D |q^i|^p dx)^(1/p) for even p; grid/layer max for inf.

    The layer aggregation folds the three layers into one integral; see
    lp_norm_layerwise for the sum-of-layer-norms variant (the two are
    equivalent within a factor 3^((p-1)/p)).
    """
    vals = _as_layer_grid(field)
    if p == np.inf or p == "inf":
        return float(np.max(np.abs(vals)))
    p = int(p)
    if p < 2 or p % 2 != 0:
        raise UnsupportedExponentError(
            f"p={p}: finite exponents must be even integers >= 2")
    peak = np.max(np.abs(vals))
    if peak == 0:
        return 0.0
    # factor out the peak so large p cannot overflow
    scaled = vals / peak
    total = float(np.sum(scaled**p * field.basis.quad_weights))
    return peak * total ** (1.0 / p)


def layer_lp_norms(field: LayerField, p) -> np.ndarray:
    """Per-layer Lp norms, length 3."""
    vals = _as_layer_grid(field)
    out = np.empty(N_LAYERS)
    for i in range(N_LAYERS):
        one = LayerField.from_grid(
            field.basis, np.stack([vals[i], np.zeros_like(vals[i]),
                                   np.zeros_like(vals[i])]))
        out[i] = lp_norm(one, p)
    return out


def lp_norm_layerwise(field: LayerField, p) -> float:
    """Sum of per-layer Lp norms."""
    return float(np.sum(layer_lp_norms(field, p)))


def fractional_norm(field: LayerField, alpha: float) -> float:
    """Spectral Sobolev norm (sum_i sum_nm lambda^alpha |qhat|^2)^(1/2)."""
    if alpha < 0:
        raise UnsupportedExponentError(
            "alpha must be >= 0 (use dual_h1_distance for the H^-1 metric)")
    c = field.spectral()
    lam = field.basis.eigenvalues
    return float(np.sqrt(np.sum(lam**alpha * c**2)))


def dual_h1_distance(a: LayerField, b: LayerField) -> float:
    """H^-1 distance (sum_i sum_nm lambda^-1 |ahat - bhat|^2)^(1/2)."""
    if not a.basis.compatible(b.basis):
        raise ShapeError("fields live on different bases")
    d = a.spectral() - b.spectral()
    return float(np.sqrt(np.sum(d**2 / a.basis.eigenvalues)))


def l2_norm_spectral(coeffs: np.ndarray) -> float:
    """Parseval form of the L2 norm from coefficients."""
    return float(np.sqrt(np.sum(coeffs**2)))
