"""Picard iteration for ``i u_t + |nabla|^a u = V u`` and an independent split-step solver.

The solution map is the Duhamel fixed point::

    Phi(u)(t) = exp(i t |nabla|^a) f - i int_0^t exp(i (t - s) |nabla|^a) V(s) u(s) ds.

Iterates live on a :class:`~displab.quadrature.TimeMesh`; each application of
``Phi`` is one call to :func:`~displab.propagator.duhamel_field`.  When the
observed contraction is too weak the time interval is bisected and the pieces
are glued, the last frame of one piece seeding the next.

The reference integrator is Strang splitting on a quasi-discrete Hankel
transform (QDHT): nodes at Bessel zeros, with the symmetric transform matrix
replaced by its orthogonal polar factor so that each sub-step is exactly
unitary.  It shares no code with the transform layer used by ``Phi``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg, optimize, special

from .exponents import ProblemParams, check_wellposedness_exponents
from .norms import NormSpec, mixed_spacetime_norm, sobolev_norm, sobolev_norms
from .propagator import SpaceTimeField, duhamel_field, evolution_grid, evolve_stack, spectral_extent
from .quadrature import RadialGrid, panels_for_phase, time_mesh
from .radial_transform import RadialProfile, evaluate_at, forward_values, hankel_forward, kernel_matrix

PICARD_TOL = 1e-8
MAX_ITERATIONS = 50
SPLIT_RATIO = 0.5
MAX_DEPTH = 8
CROSS_ORACLE_TOL = 1e-3


class ContractionError(RuntimeError):
    """Picard iteration did not contract even after maximal interval splitting."""


# ---------------------------------------------------------------------------
# exponents and potentials


@dataclass(frozen=True)
class WellposedExponents:
    """``(q, p)`` for the solution and ``(r, w)`` for the potential."""

    q: object
    p: object
    r: object
    w: object

    def verdict(self, params: ProblemParams):
        return check_wellposedness_exponents(params, self.q, self.p, self.r, self.w)

    def floats(self) -> dict:
        return {k: float(getattr(self, k)) for k in ("q", "p", "r", "w")}


@dataclass(frozen=True)
class Potential:
    """``V(r, t) = strength * shape(r, t)``, a callable that both solvers sample."""

    shape: object
    strength: complex = 1.0

    def __call__(self, r, t):
        return self.strength * np.asarray(self.shape(r, t), dtype=complex)

    def scaled(self, c) -> "Potential":
        return Potential(self.shape, self.strength * c)

    @property
    def is_real(self) -> bool:
        probe = self(np.linspace(0.0, 4.0, 9), 0.37)
        return bool(np.all(np.abs(np.imag(probe)) == 0))


def gaussian_potential(width: float = 1.0, pulse: float = 0.5) -> Potential:
    """``exp(-r^2 / (2 width^2)) (1 + pulse sin t)``: smooth, real, in every ``L^r_t L^w_x``."""
    return Potential(lambda r, t: np.exp(-0.5 * (r / width) ** 2) * (1.0 + pulse * np.sin(t)))


def sample_potential(V, params: ProblemParams, mesh, grid: RadialGrid) -> SpaceTimeField:
    if isinstance(V, SpaceTimeField):
        return SpaceTimeField(params, mesh.nodes, grid, V.at(mesh.nodes), mesh=mesh)
    return SpaceTimeField.on_mesh(params, mesh, grid, V)


def sample_potential_frame(V, f: RadialProfile, t: float) -> np.ndarray:
    if isinstance(V, SpaceTimeField):
        return V.at([t])[0]
    return np.asarray(V(f.grid.nodes, t), dtype=complex) * np.ones(len(f.grid))


def potential_norm(V, params: ProblemParams, grid: RadialGrid, T: float, exps: WellposedExponents,
                   panels: int = 8, order: int = 16) -> float:
    """``||V||_{L^r_t L^w_x}`` over ``[0, T]``."""
    mesh = time_mesh(0.0, T, panels, order)
    field_ = sample_potential(V, params, mesh, grid)
    return mixed_spacetime_norm(field_, NormSpec(float(exps.r), float(exps.w)))


# ---------------------------------------------------------------------------
# Picard iteration


@dataclass
class PicardRun:
    """Diagnostics of one (possibly bisected) Picard solve."""

    exponents: dict
    intervals: list = field(default_factory=list)
    distances: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    fixed_point_residual: float = math.nan
    reference_residual: float | None = None
    converged: bool = False

    @property
    def splits(self) -> int:
        return len(self.intervals) - 1

    def as_dict(self) -> dict:
        return asdict(self)


def _mesh_for(f: RadialProfile, V, alpha: float, t0: float, t1: float, order: int, extra_rate: float):
    """Mesh resolving the iterates' spectra.

    Each Picard step multiplies by ``V`` again, so the band of ``V f`` is
    widened by the band of ``V`` itself (supports add under convolution).
    """
    rg = evolution_grid(f.grid)

    def extent(vals):
        return spectral_extent(rg.nodes, forward_values(f.dim, f.grid, vals, rg.nodes))

    v0 = sample_potential_frame(V, f, t0)
    rho_sig = max(1.0, extent(f.values), extent(v0 * f.values) + extent(v0))
    return time_mesh(t0, t1, panels_for_phase(t0, t1, rho_sig ** alpha + extra_rate, order), order)


def _phi(free: SpaceTimeField, Vf: SpaceTimeField, u: SpaceTimeField) -> SpaceTimeField:
    return free.with_values(free.values + duhamel_field(u.with_values(Vf.values * u.values)).values)


def _iterate(free: SpaceTimeField, Vf: SpaceTimeField, spec: NormSpec, u0: SpaceTimeField,
             tol: float, max_iter: int, split_ratio: float | None):
    """Iterate from ``u0``; returns ``(u, distances, contracted)``."""
    u = u0
    dists = []
    for m in range(max_iter):
        nxt = _phi(free, Vf, u)
        d = mixed_spacetime_norm(nxt.with_values(nxt.values - u.values), spec)
        dists.append(d)
        u = nxt
        if d <= tol * dists[0] or d == 0.0:
            return u, dists, True
        if not math.isfinite(d) or d > 1e8 * max(dists[0], 1e-300):
            return u, dists, False
        if split_ratio is not None and m == 2 and dists[2] > split_ratio * dists[1]:
            return u, dists, False
    return u, dists, False


def picard_solve(f: RadialProfile, V, T: float, exponents: WellposedExponents, params: ProblemParams, *,
                 tol: float = PICARD_TOL, max_iter: int = MAX_ITERATIONS, split_ratio: float = SPLIT_RATIO,
                 max_depth: int = MAX_DEPTH, order: int = 16, initial: str = "free",
                 validate: bool = True) -> tuple[SpaceTimeField, PicardRun]:
    """Fixed point of ``Phi`` on ``[0, T]`` with bisection when the contraction is weak.

    ``initial`` selects the first iterate: ``"free"`` (the homogeneous flow)
    or ``"zero"``.  ``validate`` checks the exponents against the
    well-posedness conditions; turn it off for cross-checks outside the
    admissible range (e.g. ``alpha = 2``).
    """
    if validate:
        verdict = exponents.verdict(params)
        if not verdict:
            raise ValueError(f"exponents fail the well-posedness conditions: {verdict.failures}")
    if initial not in ("free", "zero"):
        raise ValueError("initial must be 'free' or 'zero'")
    spec = NormSpec(float(exponents.q), float(exponents.p))
    run = PicardRun(exponents.floats())
    pieces = []
    # the potential's own time variation sets a floor on the panel count
    v_rate = 4.0

    def solve(g: RadialProfile, t0: float, t1: float, depth: int):
        mesh = _mesh_for(g, V, float(params.alpha), t0, t1, order, v_rate)
        free = SpaceTimeField(params, mesh.nodes, g.grid, evolve_stack(g, mesh.nodes - t0, params), mesh=mesh)
        Vf = sample_potential(V, params, mesh, g.grid)
        u0 = free if initial == "free" else free.with_values(np.zeros_like(free.values))
        last = depth >= max_depth
        u, dists, ok = _iterate(free, Vf, spec, u0, tol, max_iter, None if last else split_ratio)
        if not ok and not last:
            mid = 0.5 * (t0 + t1)
            left = solve(g, t0, mid, depth + 1)
            return solve(left, mid, t1, depth + 1)
        if not ok:
            raise ContractionError(f"no contraction on [{t0:g}, {t1:g}] at depth {depth}: d={dists[-3:]}")
        resid = _phi(free, Vf, u)
        rel = mixed_spacetime_norm(resid.with_values(resid.values - u.values), spec)
        scale = max(mixed_spacetime_norm(u, spec), 1e-300)
        run.intervals.append([t0, t1])
        run.distances.append(dists)
        run.ratios.append([b / a if a > 0 else 0.0 for a, b in zip(dists[:-1], dists[1:])])
        run.iterations.append(len(dists))
        run.fixed_point_residual = max(0.0 if math.isnan(run.fixed_point_residual)
                                       else run.fixed_point_residual, rel / scale)
        pieces.append(u)
        # frame at t1 seeds the next piece
        end = u.at([t1])[0]
        return RadialProfile(g.dim, g.grid, end)

    solve(f, 0.0, float(T), 0)
    u = glue(pieces)
    last_ratios = [r[-1] for r in run.ratios if r]
    run.converged = all(r <= 0.9 for r in last_ratios)
    return u, run


def glue(pieces: list[SpaceTimeField]) -> SpaceTimeField:
    if len(pieces) == 1:
        return pieces[0]
    first = pieces[0]
    return SpaceTimeField(first.params, np.concatenate([p.times for p in pieces]), first.grid,
                          np.concatenate([p.values for p in pieces]),
                          np.concatenate([p.time_weights for p in pieces]))


def contraction_slope(f: RadialProfile, V: Potential, T: float, exponents: WellposedExponents,
                      params: ProblemParams, probe: float = 1.0, order: int = 16) -> float:
    """``kappa`` with (ratio after iteration 2) ``= kappa * |strength|``, from one unsplit run.

    The increments ``u_{m+1} - u_m`` are homogeneous of degree ``m + 1`` in
    ``V``, so every ratio is exactly linear in the strength.
    """
    Vp = V.scaled(probe)
    mesh = _mesh_for(f, Vp, float(params.alpha), 0.0, float(T), order, 4.0)
    free = SpaceTimeField(params, mesh.nodes, f.grid, evolve_stack(f, mesh.nodes, params), mesh=mesh)
    Vf = sample_potential(Vp, params, mesh, f.grid)
    spec = NormSpec(float(exponents.q), float(exponents.p))
    _, d, _ = _iterate(free, Vf, spec, free, 0.0, 3, None)
    return (d[2] / d[1]) / (abs(V.strength) * probe)


def contraction_threshold(f, V, T, exponents, params, target: float = SPLIT_RATIO, **kw) -> float:
    """Strength multiplier of ``V`` at which the iteration-2 ratio reaches ``target`` (fitted)."""
    return target / (contraction_slope(f, V, T, exponents, params, **kw) * abs(V.strength))


# ---------------------------------------------------------------------------
# split-step reference on a quasi-discrete Hankel transform


def bessel_zeros(nu: float, count: int) -> np.ndarray:
    """First ``count`` positive zeros of ``J_nu`` (McMahon start, bracketed root find)."""
    if float(nu).is_integer():
        return special.jn_zeros(int(nu), count)
    mu = 4.0 * nu * nu
    out = np.empty(count)
    f = lambda x: special.jv(nu, x)
    for k in range(1, count + 1):
        beta = (k + 0.5 * nu - 0.25) * math.pi
        guess = beta - (mu - 1) / (8 * beta)
        lo, hi = guess - 1.0, guess + 1.0
        if k == 1:
            lo = max(lo, 1e-6)
        out[k - 1] = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return out


@dataclass(frozen=True, eq=False)
class QDHT:
    """Orthogonal Hankel transform of order ``nu`` on ``[0, R]`` with ``N`` nodes."""

    dim: int
    R: float
    N: int

    def __post_init__(self):
        nu = (self.dim - 2) / 2
        j = bessel_zeros(nu, self.N + 1)
        jN1 = j[-1]
        j = j[:-1]
        J1 = np.abs(special.jv(nu + 1, j))
        C = 2.0 * special.jv(nu, np.outer(j, j) / jN1) / (np.outer(J1, J1) * jN1)
        U, _ = linalg.polar(C)
        U = 0.5 * (U + U.T)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "r", j * self.R / jN1)
        object.__setattr__(self, "rho", j / self.R)
        object.__setattr__(self, "scale", J1)
        object.__setattr__(self, "matrix", U)
        # int |f|^2 r^(n-1) dr  ~  sum w_k |r_k^nu f_k|^2
        object.__setattr__(self, "l2_weights", 2.0 * self.R ** 2 / (jN1 ** 2 * J1 ** 2))

    @property
    def grid(self) -> RadialGrid:
        return RadialGrid(self.r.copy(), self.l2_weights / self.r, float(self.R), float(self.rho[-1]),
                          key=("qdht", self.dim, float(self.R), self.N))

    def to_coeffs(self, f_values: np.ndarray) -> np.ndarray:
        return f_values * self.r ** self.nu / self.scale

    def from_coeffs(self, a: np.ndarray) -> np.ndarray:
        return a * self.scale / self.r ** self.nu

    def multiply(self, a: np.ndarray, symbol_values: np.ndarray) -> np.ndarray:
        """``F^-1[m F]`` in coefficient space."""
        U = self.matrix
        return U @ (symbol_values * (U @ a))

    def mass(self, f_values: np.ndarray) -> float:
        return float(np.sum(self.l2_weights * np.abs(f_values * self.r ** self.nu) ** 2))


def default_qdht(dim: int, R: float = 64.0, rho_max: float = 12.0) -> QDHT:
    return QDHT(dim, R, int(math.ceil(rho_max * R / math.pi)) + 1)


def splitstep_reference(f, V, T: float, dt: float, params: ProblemParams, *, times=None,
                        transform: QDHT | None = None) -> SpaceTimeField:
    """Strang splitting: half dispersive step, full potential step at the midpoint, half dispersive step.

    ``f`` is a :class:`RadialProfile` (resynthesized at the Bessel-zero
    nodes) or a callable of ``r``.  Frames are produced at ``times``
    (default: a uniform grid of step ``dt``); between outputs the step is
    shrunk to land exactly on each requested time.
    """
    H = transform or default_qdht(params.n)
    a = float(params.alpha)
    r = H.r
    if isinstance(f, RadialProfile):
        g = hankel_forward(f, evolution_grid(f.grid))
        f0 = evaluate_at(g, r)
    else:
        f0 = np.asarray(f(r), dtype=complex)
    coeffs = H.to_coeffs(f0)
    rho_sig = spectral_extent(H.rho, H.matrix @ coeffs)
    v_max = float(np.max(np.abs(V(r, 0.0))))
    if dt * rho_sig ** a > 2 * math.pi or dt * v_max > 1.0:
        raise ValueError(f"dt={dt:g} under-resolves the dispersion phase (rate {rho_sig ** a:.3g}) "
                         f"or the potential (max {v_max:.3g})")
    times = np.arange(1, int(round(T / dt)) + 1) * dt if times is None else np.asarray(times, dtype=float)
    sym = H.rho ** a
    t = 0.0
    frames = []
    for target in times:
        steps = max(1, int(math.ceil((target - t) / dt - 1e-9)))
        h = (target - t) / steps
        half = np.exp(0.5j * h * sym)
        for _ in range(steps):
            coeffs = H.multiply(coeffs, half)
            vals = H.from_coeffs(coeffs) * np.exp(-1j * h * V(r, t + 0.5 * h))
            coeffs = H.multiply(H.to_coeffs(vals), half)
            t += h
        frames.append(H.from_coeffs(coeffs))
    return SpaceTimeField(params, times, H.grid, np.stack(frames))


def frame_errors(u: SpaceTimeField, ref: SpaceTimeField) -> np.ndarray:
    """Relative ``L^2`` gap per frame, with ``u`` resynthesized at the reference nodes."""
    if not np.allclose(u.times, ref.times, rtol=0, atol=1e-12):
        raise ValueError("fields must share their time nodes")
    rg = evolution_grid(u.grid)
    nodes = ref.grid.nodes
    spec = forward_values(u.dim, u.grid, u.values, rg.nodes)
    w = rg.weights * rg.nodes ** (u.dim - 1)
    S = kernel_matrix(u.dim, nodes, rg.nodes)
    vals = (2 * math.pi) ** (-u.dim / 2) * ((spec * w) @ S.T)
    meas = ref.grid.weights * nodes ** (u.dim - 1)
    num = np.sqrt(np.sum(meas * np.abs(vals - ref.values) ** 2, axis=1))
    den = np.sqrt(np.sum(meas * np.abs(ref.values) ** 2, axis=1))
    return num / np.maximum(den, 1e-300)


# ---------------------------------------------------------------------------
# persistence of regularity


@dataclass
class PersistenceReport:
    gamma: float
    sup_sobolev: float
    data_sobolev: float
    potential_norm: float
    solution_norm: float
    constant: float
    calibration: float | None = None
    holds: bool | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def persistence_check(u: SpaceTimeField, f: RadialProfile, V, exponents: WellposedExponents,
                      params: ProblemParams, *, calibration: float | None = None,
                      factor: float = 3.0) -> PersistenceReport:
    """Ratio ``sup_t ||u||_{H^g} / (||f||_{H^g} + ||V||_{L^r L^w} ||u||_{L^q L^p})``.

    With a ``calibration`` constant the bound is declared to hold when the
    ratio lies within ``factor`` of it.
    """
    g = float(params.gamma)
    T = float(np.sum(u.time_weights))
    sup_h = float(np.max(sobolev_norms(u, g)))
    data = sobolev_norm(f, g)
    vn = potential_norm(V, params, u.grid, T, exponents)
    un = mixed_spacetime_norm(u, NormSpec(float(exponents.q), float(exponents.p)))
    c = sup_h / (data + vn * un)
    holds = None
    if calibration is not None:
        holds = bool(calibration / factor <= c <= calibration * factor)
    return PersistenceReport(g, sup_h, data, vn, un, c, calibration, holds)
