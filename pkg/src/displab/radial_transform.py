"""Fourier transform of radial functions on R^n as a Hankel-type integral.

Convention: ``f^(xi) = int f(x) exp(-i x.xi) dx``, so for radial ``f``::

    f^(rho) = (2 pi)^(n/2) rho^(-nu) int_0^inf f(r) J_nu(r rho) r^(n/2) dr,   nu = (n-2)/2

and the inverse carries ``(2 pi)^(-n)``.  Both directions are evaluated as
``sum_i w_i f(r_i) r_i^(n-1) S(r_i rho)`` with the regular kernel
``S(z) = z^(-nu) J_nu(z)``; the kernel matrix is cached per grid pair.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .bessel import bessel_j_scaled_array
from .quadrature import RadialGrid, radial_grid

DEFAULT_R_MAX = 64.0
DEFAULT_RHO_MAX = 12.0
DEFAULT_TOL = 1e-8


class ResolutionError(RuntimeError):
    """A profile or transform is not resolved by its grid."""


def sphere_area(n: int) -> float:
    """``|S^{n-1}| = 2 pi^(n/2) / Gamma(n/2)``."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def surface_constant(n: int) -> float:
    """``c_n`` in ``int_{S^{n-1}} exp(-i s x'.e) dx' = c_n s^(-nu) J_nu(s)``."""
    return (2 * math.pi) ** (n / 2)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Values of a radial function on the nodes of a :class:`RadialGrid`."""

    dim: int
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != self.grid.nodes.shape:
            raise ValueError(f"{vals.shape} values for {len(self.grid)} grid nodes")
        if not np.all(np.isfinite(vals)):
            raise ValueError("profile values must be finite")
        object.__setattr__(self, "values", vals)
        if self.dim < 1:
            raise ValueError("dimension must be positive")

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    @property
    def measure(self) -> np.ndarray:
        """Quadrature weights for ``int ... dx`` over R^n."""
        return sphere_area(self.dim) * self.grid.weights * self.grid.nodes ** (self.dim - 1)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.measure * np.abs(self.values) ** 2)))

    def inner(self, other: "RadialProfile") -> complex:
        return complex(np.sum(self.measure * np.conj(self.values) * other.values))

    def with_values(self, values) -> "RadialProfile":
        return type(self)(self.dim, self.grid, values)

    def __add__(self, other):
        _same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__


class SpectralProfile(RadialProfile):
    """Values of a radial Fourier transform on a frequency grid ``rho``."""

    @property
    def rho(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def measure(self) -> np.ndarray:
        """Weights for ``(2 pi)^-n int ... d xi`` (Plancherel-normalized)."""
        return (sphere_area(self.dim) * self.grid.weights * self.grid.nodes ** (self.dim - 1)
                / (2 * math.pi) ** self.dim)


def _same_grid(a: RadialProfile, b: RadialProfile) -> None:
    if a.grid is not b.grid and not (
        a.grid.nodes.shape == b.grid.nodes.shape and np.array_equal(a.grid.nodes, b.grid.nodes)):
        raise ValueError("profiles live on different grids")
    if a.dim != b.dim:
        raise ValueError("profiles have different dimensions")


@dataclass(frozen=True)
class Domain:
    """A matched pair of physical and spectral grids for dimension ``dim``.

    The physical grid covers ``[0, r_max]`` and resolves frequencies up to
    ``rho_max``; the spectral grid is its dual.
    """

    dim: int
    r_max: float = DEFAULT_R_MAX
    rho_max: float = DEFAULT_RHO_MAX
    inner: float = 2.0 ** -3

    @property
    def r_grid(self) -> RadialGrid:
        return radial_grid(float(self.r_max), float(self.rho_max), self.inner)

    @property
    def rho_grid(self) -> RadialGrid:
        return radial_grid(float(self.rho_max), float(self.r_max), self.inner)

    def profile(self, func) -> RadialProfile:
        """Sample ``func(r)`` on the physical grid."""
        return RadialProfile(self.dim, self.r_grid, func(self.r_grid.nodes))

    def spectrum(self, func) -> SpectralProfile:
        return SpectralProfile(self.dim, self.rho_grid, func(self.rho_grid.nodes))


_KERNEL_CACHE: OrderedDict = OrderedDict()
_KERNEL_CACHE_SIZE = 8


def kernel_matrix(dim: int, r_nodes: np.ndarray, rho_nodes: np.ndarray, key=None) -> np.ndarray:
    """``S[i, j] = (r_i rho_j)^(-nu) J_nu(r_i rho_j)``; cached when ``key`` is given."""
    if key is not None and key in _KERNEL_CACHE:
        _KERNEL_CACHE.move_to_end(key)
        return _KERNEL_CACHE[key]
    nu = (dim - 2) / 2
    mat = bessel_j_scaled_array(nu, np.multiply.outer(r_nodes, rho_nodes))
    if key is not None:
        _KERNEL_CACHE[key] = mat
        while len(_KERNEL_CACHE) > _KERNEL_CACHE_SIZE:
            _KERNEL_CACHE.popitem(last=False)
    return mat


def _grid_kernel(dim: int, r_grid: RadialGrid, rho_grid: RadialGrid) -> np.ndarray:
    key = (dim, r_grid.key, rho_grid.key) if r_grid.key and rho_grid.key else None
    return kernel_matrix(dim, r_grid.nodes, rho_grid.nodes, key)


def dual_grid(grid: RadialGrid) -> RadialGrid:
    return radial_grid(grid.bandwidth, grid.extent)


def forward_values(dim: int, r_grid: RadialGrid, values: np.ndarray, rho_nodes: np.ndarray) -> np.ndarray:
    """Transform samples (possibly a stack along the last axis) to arbitrary ``rho``."""
    S = kernel_matrix(dim, r_grid.nodes, rho_nodes)
    w = r_grid.weights * r_grid.nodes ** (dim - 1)
    return (2 * math.pi) ** (dim / 2) * ((values * w) @ S)


def hankel_forward(f: RadialProfile, rho_grid: RadialGrid | None = None, *, check: bool = False,
                   tol: float = DEFAULT_TOL) -> SpectralProfile:
    """Radial Fourier transform of ``f`` onto ``rho_grid`` (default: the dual grid)."""
    rho_grid = rho_grid or dual_grid(f.grid)
    if check:
        check_resolution(f, tol)
    S = _grid_kernel(f.dim, f.grid, rho_grid)
    w = f.grid.weights * f.grid.nodes ** (f.dim - 1)
    vals = (2 * math.pi) ** (f.dim / 2) * ((f.values * w) @ S)
    out = SpectralProfile(f.dim, rho_grid, vals)
    if check:
        check_spectral_tail(out, tol)
    return out


def hankel_inverse(g: SpectralProfile, r_grid: RadialGrid | None = None, *, check: bool = False,
                   tol: float = DEFAULT_TOL) -> RadialProfile:
    """Inverse transform with the ``(2 pi)^-n`` factor."""
    r_grid = r_grid or dual_grid(g.grid)
    if check:
        check_spectral_tail(g, tol)
    S = _grid_kernel(g.dim, r_grid, g.grid)
    w = g.grid.weights * g.grid.nodes ** (g.dim - 1)
    vals = (2 * math.pi) ** (-g.dim / 2) * (S @ (g.values * w))
    return RadialProfile(g.dim, r_grid, vals)


def inverse_stack(dim: int, rho_grid: RadialGrid, values: np.ndarray, r_grid: RadialGrid) -> np.ndarray:
    """Inverse transform of a stack ``values[..., n_rho]`` -> ``[..., n_r]``."""
    S = _grid_kernel(dim, r_grid, rho_grid)
    w = rho_grid.weights * rho_grid.nodes ** (dim - 1)
    return (2 * math.pi) ** (-dim / 2) * ((values * w) @ S.T)


def forward_stack(dim: int, r_grid: RadialGrid, values: np.ndarray, rho_grid: RadialGrid) -> np.ndarray:
    """Forward transform of a stack ``values[..., n_r]`` -> ``[..., n_rho]``."""
    S = _grid_kernel(dim, r_grid, rho_grid)
    w = r_grid.weights * r_grid.nodes ** (dim - 1)
    return (2 * math.pi) ** (dim / 2) * ((values * w) @ S)


def evaluate_at(g: SpectralProfile, r) -> np.ndarray:
    """Resynthesize the physical profile at arbitrary radii (no interpolation)."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    S = kernel_matrix(g.dim, r, g.grid.nodes)
    w = g.grid.weights * g.grid.nodes ** (g.dim - 1)
    return (2 * math.pi) ** (-g.dim / 2) * (S @ (g.values * w))


def _outer_shell(grid: RadialGrid, frac: float = 0.9) -> np.ndarray:
    return grid.nodes >= frac * grid.extent


def check_resolution(f: RadialProfile, tol: float = DEFAULT_TOL) -> None:
    """Raise if ``f`` is not negligible near the outer edge of its grid."""
    scale = np.max(np.abs(f.values)) or 1.0
    edge = _outer_shell(f.grid)
    tail = np.max(np.abs(f.values[edge])) / scale if edge.any() else 0.0
    if tail > tol:
        r_bad = float(f.r[edge][np.argmax(np.abs(f.values[edge]))])
        raise ResolutionError(f"profile not decayed at r={r_bad:.4g} (relative {tail:.2e}); "
                              f"increase r_max beyond {f.grid.extent}")


def check_spectral_tail(g: SpectralProfile, tol: float = DEFAULT_TOL) -> None:
    """Raise, naming the offending ``rho``, if the spectrum is not negligible at ``rho_max``."""
    scale = np.max(np.abs(g.values)) or 1.0
    edge = _outer_shell(g.grid)
    mags = np.abs(g.values[edge]) / scale
    if edge.any() and mags.max() > tol:
        rho_bad = float(g.rho[edge][np.argmax(mags)])
        raise ResolutionError(f"spectrum not resolved at rho={rho_bad:.4g} (relative {mags.max():.2e})")


def sphere_quadrature(n: int, s: float, order: int = 64) -> complex:
    """Direct quadrature of ``int_{S^{n-1}} exp(-i s x'.e) dx'`` for ``n`` in {2, 3}.

    Independent of any Bessel evaluation: the circle uses the trapezoid rule
    in the angle, the sphere Gauss-Legendre in ``cos(theta)``.
    """
    if n == 2:
        m = max(order, int(4 * abs(s)) + 32)
        th = 2 * np.pi * np.arange(m) / m
        return complex(np.sum(np.exp(-1j * s * np.cos(th))) * 2 * np.pi / m)
    if n == 3:
        from .quadrature import interval_rule
        x, w = interval_rule(-1.0, 1.0, abs(s), min_order=order)
        return complex(2 * np.pi * np.sum(w * np.exp(-1j * s * x)))
    raise ValueError("direct sphere quadrature implemented for n = 2, 3")
