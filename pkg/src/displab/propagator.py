"""Free fractional evolution, Littlewood-Paley pieces and the Duhamel integral.

Everything here is a Fourier multiplier on radial profiles: a profile is
transformed onto a spectral grid, multiplied, and transformed back onto its
own physical grid.  The evolution grid in ``rho`` is built with bandwidth
``2 * r_max`` so that the phase ``exp(i t rho**alpha)`` stays resolved as long
as the evolved wave stays inside ``[0, r_max]``; leaving that region is
reported as a :class:`ResolutionError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exponents import ProblemParams
from .quadrature import (RadialGrid, TimeMesh, gauss_legendre, lagrange_matrix, panels_for_phase,
                         radial_grid, scaled_mesh, time_mesh)
from .radial_transform import (RadialProfile, ResolutionError, SpectralProfile, forward_stack,
                               hankel_forward, hankel_inverse, inverse_stack)

SPECTRAL_TAIL = 1e-10
DUHAMEL_TOL = 1e-6


# ---------------------------------------------------------------------------
# cutoffs


def _smooth_step(x: np.ndarray, sharpness: float) -> np.ndarray:
    """0 for x <= 0, 1 for x >= 1, smooth in between (``exp(-s/x)`` gluing)."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(x > 0, np.exp(-sharpness / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-sharpness / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
        out = a / (a + b)
    out = np.where(x <= 0, 0.0, out)
    return np.where(x >= 1, 1.0, out)


@dataclass(frozen=True)
class CutoffSpec:
    """Dyadic cutoff ``phi(rho) = eta(rho) - eta(2 rho)`` supported in ``(1/2, 2)``.

    ``eta`` equals 1 on ``[0, 1]`` and 0 on ``[2, inf)``.  Because ``phi`` is a
    difference of dilates of ``eta``, ``sum_k phi(rho / 2**k)`` telescopes.
    """

    transition_sharpness: float = 1.0
    support: tuple = (0.5, 2.0)

    def __post_init__(self):
        if not self.transition_sharpness > 0:
            raise ValueError("transition_sharpness must be positive")
        if tuple(self.support) != (0.5, 2.0):
            raise ValueError("the dyadic cutoff is supported in (1/2, 2)")

    def eta(self, rho) -> np.ndarray:
        return 1.0 - _smooth_step(np.asarray(rho, dtype=float) - 1.0, self.transition_sharpness)

    def phi(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return self.eta(rho) - self.eta(2.0 * rho)

    def phi_k(self, rho, k: int) -> np.ndarray:
        return self.phi(np.asarray(rho, dtype=float) / 2.0 ** k)

    def kernel_weight(self, rho) -> np.ndarray:
        """The square of the kernel cutoff, ``rho * phi(rho)``."""
        rho = np.asarray(rho, dtype=float)
        return rho * self.phi(rho)

    def partition_sum(self, rho, K: int) -> np.ndarray:
        """``sum_{k=-K}^{K} phi(rho / 2**k)``, summed term by term."""
        rho = np.asarray(rho, dtype=float)
        total = np.zeros_like(rho)
        for k in range(-K, K + 1):
            total = total + self.phi_k(rho, k)
        return total

    def bump(self, rho) -> np.ndarray:
        """A cutoff supported in ``[1, 2]`` (the dyadic cutoff dilated by 3/2 and recentred)."""
        rho = np.asarray(rho, dtype=float)
        # map [1, 2] onto (1/2, 2) affinely
        return self.phi(0.5 + 1.5 * (rho - 1.0))


DEFAULT_CUTOFF = CutoffSpec()


# ---------------------------------------------------------------------------
# space-time fields


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Frames of a radial function on a common grid at increasing times.

    ``values[i]`` holds the frame at ``times[i]``.  ``time_weights`` integrate
    over the time span; when the field lives on a :class:`TimeMesh` it can be
    evaluated between nodes by panel-wise polynomial interpolation.
    """

    params: ProblemParams
    times: np.ndarray
    grid: RadialGrid
    values: np.ndarray
    time_weights: np.ndarray | None = None
    mesh: TimeMesh | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        vals = np.asarray(self.values, dtype=complex)
        if times.ndim != 1 or np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if vals.shape != (times.size, len(self.grid)):
            raise ValueError(f"values shape {vals.shape} != ({times.size}, {len(self.grid)})")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        tw = self.time_weights
        if tw is None and self.mesh is not None:
            tw = self.mesh.weights
        if tw is None and times.size > 1:
            tw = _trapezoid_weights(times)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "time_weights", None if tw is None else np.asarray(tw, dtype=float))

    @property
    def dim(self) -> int:
        return self.params.n

    @property
    def alpha(self) -> float:
        return float(self.params.alpha)

    def __len__(self) -> int:
        return self.times.size

    def frame(self, i: int) -> RadialProfile:
        return RadialProfile(self.dim, self.grid, self.values[i])

    @property
    def frames(self) -> list[RadialProfile]:
        return [self.frame(i) for i in range(len(self))]

    @classmethod
    def from_frames(cls, params: ProblemParams, times, frames, **kw) -> "SpaceTimeField":
        grid = frames[0].grid
        for fr in frames:
            if fr.grid is not grid and not np.array_equal(fr.grid.nodes, grid.nodes):
                raise ValueError("all frames must share one grid")
        return cls(params, np.asarray(times, float), grid, np.stack([fr.values for fr in frames]), **kw)

    @classmethod
    def on_mesh(cls, params: ProblemParams, mesh: TimeMesh, grid: RadialGrid, func) -> "SpaceTimeField":
        """Sample ``func(r, t)`` (broadcasting) at every mesh node."""
        vals = func(grid.nodes[None, :], mesh.nodes[:, None])
        vals = np.broadcast_to(vals, (mesh.nodes.size, len(grid)))
        return cls(params, mesh.nodes, grid, np.array(vals, dtype=complex), mesh=mesh)

    def with_values(self, values) -> "SpaceTimeField":
        return SpaceTimeField(self.params, self.times, self.grid, values, self.time_weights, self.mesh)

    def restrict(self, t0: float, t1: float) -> "SpaceTimeField":
        """Frames with ``t0 <= t <= t1``; quadrature weights kept (the mesh is dropped)."""
        m = (self.times >= t0) & (self.times <= t1)
        tw = None if self.time_weights is None else self.time_weights[m]
        return SpaceTimeField(self.params, self.times[m], self.grid, self.values[m], tw)

    def at(self, s) -> np.ndarray:
        """Values at arbitrary times ``s`` (panel-wise Lagrange interpolation on the mesh)."""
        if self.mesh is None:
            raise ValueError("interpolation in time needs a field on a TimeMesh")
        s = np.atleast_1d(np.asarray(s, dtype=float))
        edges, order = self.mesh.panel_edges, self.mesh.order
        t0, t1 = edges[0], edges[-1]
        if np.any(s < t0 - 1e-12) or np.any(s > t1 + 1e-12):
            raise ValueError(f"times outside the field span [{t0}, {t1}]")
        out = np.empty((s.size, len(self.grid)), dtype=complex)
        panel = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, len(edges) - 2)
        for p in np.unique(panel):
            sel = panel == p
            sl = slice(p * order, (p + 1) * order)
            L = lagrange_matrix(self.times[sl], s[sel])
            out[sel] = L @ self.values[sl]
        return out


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros_like(times)
    d = np.diff(times)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


# ---------------------------------------------------------------------------
# spectral helpers


def evolution_grid(grid: RadialGrid) -> RadialGrid:
    """Spectral grid used by all multipliers acting on profiles on ``grid``."""
    return radial_grid(grid.bandwidth, 2.0 * grid.extent)


def spectral_extent(rho: np.ndarray, spectrum: np.ndarray, tol: float = SPECTRAL_TAIL) -> float:
    """Largest ``rho`` where ``|spectrum|`` exceeds ``tol`` times its maximum."""
    mag = np.abs(spectrum)
    if mag.ndim > 1:
        mag = mag.max(axis=0)
    top = mag.max()
    if top == 0:
        return 0.0
    idx = np.nonzero(mag > tol * top)[0]
    return float(rho[idx[-1]])


def check_phase_resolution(grid: RadialGrid, alpha: float, t: float, rho_sig: float) -> None:
    """Raise when the evolved wave leaves the physical grid.

    Waves at frequency ``rho`` travel at speed ``alpha * rho**(alpha-1)``; the
    evolution grid resolves phases up to ``2 * r_max`` in ``rho``.
    """
    reach = abs(t) * alpha * rho_sig ** (alpha - 1)
    if reach > 0.9 * grid.extent:
        need = reach / 0.9
        raise ResolutionError(
            f"|t|={abs(t):g} moves frequency {rho_sig:.3g} to r={reach:.3g}; "
            f"need r_max >= {need:.3g} (spectral grid bandwidth >= {2 * need:.3g}), "
            f"have r_max={grid.extent:g}")


def symbol(rho: np.ndarray, alpha: float) -> np.ndarray:
    return np.asarray(rho, dtype=float) ** float(alpha)


def apply_multiplier(f: RadialProfile, mult) -> RadialProfile:
    """``F^-1[m(rho) f^]`` back onto ``f``'s grid; ``mult`` is a callable of ``rho``."""
    g = hankel_forward(f, evolution_grid(f.grid))
    return hankel_inverse(g.with_values(mult(g.rho) * g.values), f.grid)


def fractional_laplacian(f: RadialProfile, alpha: float) -> RadialProfile:
    """``|nabla|**alpha f``."""
    return apply_multiplier(f, lambda rho: symbol(rho, alpha))


# ---------------------------------------------------------------------------
# evolution and projections


def _alpha_of(params_or_alpha) -> float:
    if isinstance(params_or_alpha, ProblemParams):
        return float(params_or_alpha.alpha)
    return float(params_or_alpha)


def evolve_free(f: RadialProfile, t: float, alpha) -> RadialProfile:
    """``exp(i t |nabla|**alpha) f``.  ``alpha`` may be a :class:`ProblemParams`."""
    alpha = _alpha_of(alpha)
    if t == 0:
        return f.with_values(f.values.copy())
    g = hankel_forward(f, evolution_grid(f.grid))
    check_phase_resolution(f.grid, alpha, t, spectral_extent(g.rho, g.values))
    phase = np.exp(1j * t * symbol(g.rho, alpha))
    return hankel_inverse(g.with_values(phase * g.values), f.grid)


def evolve_stack(f: RadialProfile, times, alpha) -> np.ndarray:
    """Frames ``exp(i t_m |nabla|**alpha) f`` for all ``times`` as an array ``[m, r]``."""
    alpha = _alpha_of(alpha)
    times = np.asarray(times, dtype=float)
    rg = evolution_grid(f.grid)
    g = hankel_forward(f, rg)
    if times.size:
        check_phase_resolution(f.grid, alpha, float(np.max(np.abs(times))),
                               spectral_extent(g.rho, g.values))
    spec = np.exp(1j * np.multiply.outer(times, symbol(g.rho, alpha))) * g.values
    return inverse_stack(f.dim, rg, spec, f.grid)


def free_field(params: ProblemParams, f: RadialProfile, mesh: TimeMesh) -> SpaceTimeField:
    return SpaceTimeField(params, mesh.nodes, f.grid, evolve_stack(f, mesh.nodes, params), mesh=mesh)


def _check_k(grid: RadialGrid, k: int) -> None:
    if 2.0 ** (k - 1) >= grid.bandwidth or 2.0 ** (k + 1) <= 1.0 / grid.extent:
        raise ValueError(f"dyadic index k={k} outside the resolvable band "
                         f"({1.0 / grid.extent:.3g}, {grid.bandwidth:.3g})")


def lp_project(f, k: int, cutoff: CutoffSpec = DEFAULT_CUTOFF):
    """Littlewood-Paley piece ``P_k f`` with symbol ``phi(|xi| / 2**k)``.

    Accepts a physical :class:`RadialProfile` (returned on the same grid) or
    a :class:`SpectralProfile` (multiplied in place).
    """
    if isinstance(f, SpectralProfile):
        if 2.0 ** (k - 1) >= f.grid.extent:
            raise ValueError(f"dyadic index k={k} beyond the spectral grid (rho <= {f.grid.extent:g})")
        return f.with_values(cutoff.phi_k(f.rho, k) * f.values)
    _check_k(f.grid, k)
    return apply_multiplier(f, lambda rho: cutoff.phi_k(rho, k))


# ---------------------------------------------------------------------------
# Duhamel integral


def _spectral_field(F: SpaceTimeField, rho_grid: RadialGrid) -> np.ndarray:
    return forward_stack(F.dim, F.grid, F.values, rho_grid)


def check_time_resolution(mesh: TimeMesh, omega: float) -> None:
    """Raise when the mesh under-resolves ``exp(-i s omega)``."""
    widths = np.diff(mesh.panel_edges)
    need = panels_for_phase(mesh.span[0], mesh.span[1], omega, mesh.order)
    if omega * widths.max() > 4.0 * mesh.order / 16.0 * (1 + 1e-9):
        raise ResolutionError(f"time mesh too coarse for phase rate {omega:.3g}: "
                              f"need >= {need} panels of order {mesh.order}, have {widths.size}")


def duhamel_field(F: SpaceTimeField) -> SpaceTimeField:
    """``-i int_0^t exp(i (t - s) |nabla|**alpha) F(s) ds`` at every node of ``F.mesh``.

    Evaluated in the interaction picture: the spectrum of ``F`` is
    conjugated by ``exp(-i s rho**alpha)``, integrated with the mesh's
    cumulative matrix, and propagated back to ``t``.
    """
    if F.mesh is None:
        raise ValueError("duhamel_field needs a forcing sampled on a TimeMesh")
    alpha = F.alpha
    rg = evolution_grid(F.grid)
    Fh = _spectral_field(F, rg)
    rho_sig = spectral_extent(rg.nodes, Fh)
    t_max = float(np.max(np.abs(F.mesh.panel_edges)))
    check_phase_resolution(F.grid, alpha, t_max, rho_sig)
    check_time_resolution(F.mesh, rho_sig ** alpha)
    sym = symbol(rg.nodes, alpha)
    s = F.mesh.nodes
    G = np.exp(-1j * np.multiply.outer(s, sym)) * Fh
    acc = F.mesh.cumulative @ G
    out = -1j * np.exp(1j * np.multiply.outer(s, sym)) * acc
    return F.with_values(inverse_stack(F.dim, rg, out, F.grid))


def _nodes_on(a: float, b: float, order: int, per_unit: float) -> tuple[np.ndarray, np.ndarray]:
    panels = max(1, int(math.ceil(abs(b - a) * per_unit / order)))
    edges = np.linspace(a, b, panels + 1)
    xs, ws = zip(*(gauss_legendre(c, d, order) for c, d in zip(edges[:-1], edges[1:])))
    return np.concatenate(xs), np.concatenate(ws)


def duhamel_integral(F, t: float, params: ProblemParams | None = None, *, grid: RadialGrid | None = None,
                     tol: float = DUHAMEL_TOL, nodes_per_unit: int = 32, max_doublings: int = 8
                     ) -> RadialProfile:
    """``-i int_0^t exp(i (t - s) |nabla|**alpha) F(s) ds`` at a single time.

    ``F`` is either a :class:`SpaceTimeField` on a :class:`TimeMesh` (the
    partial panel containing ``t`` is handled by interpolation) or a callable
    ``s -> RadialProfile``.  For callables the ``s``-rule starts at
    ``nodes_per_unit`` Gauss-Legendre nodes per unit time and is doubled until
    two successive results differ by at most ``tol * |t| * max_s ||F(s)||``.
    """
    if isinstance(F, SpaceTimeField):
        params, grid = F.params, F.grid
        sample = F.at
        t0, t1 = F.mesh.span if F.mesh is not None else (F.times[0], F.times[-1])
        if not (t0 - 1e-12 <= t <= t1 + 1e-12) and t != 0:
            raise ValueError(f"t={t} outside the forcing span [{t0}, {t1}]")
    else:
        if params is None:
            raise ValueError("params are required for a callable forcing")
        probe = F(0.0)
        grid = grid or probe.grid

        def sample(s):
            return np.stack([F(float(si)).values for si in np.atleast_1d(s)])

    alpha = float(params.alpha)
    rg = evolution_grid(grid)
    if t == 0:
        return RadialProfile(params.n, grid, np.zeros(len(grid), complex))
    sym = symbol(rg.nodes, alpha)

    def integrate(per_unit):
        if isinstance(F, SpaceTimeField) and F.mesh is not None:
            s, w = _mesh_rule(F.mesh, t)
        else:
            s, w = _nodes_on(0.0, t, 16, per_unit)
        vals = sample(s)
        Fh = forward_stack(params.n, grid, vals, rg)
        acc = np.sum(w[:, None] * np.exp(-1j * np.multiply.outer(s, sym)) * Fh, axis=0)
        return acc, vals

    per_unit = float(nodes_per_unit)
    acc, vals = integrate(per_unit)
    if not isinstance(F, SpaceTimeField):
        scale = max(np.max(np.abs(forward_stack(params.n, grid, vals, rg))), 1e-300)
        for _ in range(max_doublings):
            per_unit *= 2
            acc2, vals = integrate(per_unit)
            done = np.max(np.abs(acc2 - acc)) <= tol * abs(t) * scale
            acc = acc2
            if done:
                break
        else:
            raise ResolutionError(f"Duhamel time quadrature did not reach tol={tol:g} "
                                  f"with {per_unit:g} nodes per unit time")
    check_phase_resolution(grid, alpha, t, spectral_extent(rg.nodes, acc))
    out = -1j * np.exp(1j * t * sym) * acc
    return hankel_inverse(SpectralProfile(params.n, rg, out), grid)


def _mesh_rule(mesh: TimeMesh, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature on ``[t0, t]`` reusing full mesh panels and a fresh rule on the partial one."""
    edges, order = mesh.panel_edges, mesh.order
    sign = 1.0 if t >= edges[0] else -1.0
    full = int(np.searchsorted(edges, t, side="right") - 1)
    full = max(0, min(full, len(edges) - 1))
    s = list(mesh.nodes[: full * order])
    w = list(mesh.weights[: full * order])
    a = edges[full]
    if t > a + 1e-15:
        x, ww = gauss_legendre(a, t, order)
        s.extend(x)
        w.extend(ww)
    return np.asarray(s), sign * np.asarray(w)


# ---------------------------------------------------------------------------
# scaling


def scaling_transform(u: SpaceTimeField, eps: float, *, potential: bool = False) -> SpaceTimeField:
    """``u_eps(x, t) = u(eps x, eps**alpha t)``; with ``potential`` also times ``eps**alpha``.

    The rescaled field lives on the rescaled grid ``r / eps`` and times
    ``t / eps**alpha``, so the frame values are carried over exactly.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    a = u.alpha
    tf = eps ** a
    grid = u.grid.scaled(eps)
    mesh = scaled_mesh(u.mesh, tf) if u.mesh is not None else None
    tw = None if u.time_weights is None else u.time_weights / tf
    vals = u.values * (tf if potential else 1.0)
    return SpaceTimeField(u.params, u.times / tf, grid, vals, tw, mesh)


def scale_profile(f: RadialProfile, eps: float) -> RadialProfile:
    """``f(eps x)`` on the rescaled grid."""
    return RadialProfile(f.dim, f.grid.scaled(eps), f.values)


def pde_residual(u_at, forcing_at, t: float, alpha: float, h: float = 1e-3) -> float:
    """Relative L^2 residual of ``i u_t + |nabla|**alpha u - F`` at time ``t``.

    ``u_at`` and ``forcing_at`` map a time to a :class:`RadialProfile`; the
    time derivative is a fourth-order centered difference.
    """
    um2, um1, up1, up2 = (u_at(t + c * h) for c in (-2, -1, 1, 2))
    dt = (um2.values - 8 * um1.values + 8 * up1.values - up2.values) / (12 * h)
    u = u_at(t)
    lap = fractional_laplacian(u, alpha)
    F = forcing_at(t)
    res = u.with_values(1j * dt + lap.values - F.values)
    scale = max(F.l2_norm(), lap.l2_norm(), 1e-300)
    return res.l2_norm() / scale
