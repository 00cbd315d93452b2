"""Growth of the inhomogeneous solution driven by a unit-time frequency bump.

The forcing has ``F^(xi, s) = 1_{(0,1)}(s) bump(|xi|)`` with ``bump``
supported in ``[1, 2]``.  Integrating out ``s`` gives, for ``t > 1``::

    u(x, t) = -i (2 pi)^-n  int exp(i x.xi + i t |xi|^a) omega(xi) d xi,
    omega(rho) = bump(rho) (exp(-i rho^a) - 1) / (-i rho^a),

a stationary-phase integral of size ``t^(-n/2)`` on the cone
``|x| / t = a rho0^(a-1)``, ``rho0`` in the support.  Its ``L^q_t L^p_x``
norm over ``N < t < 2N`` therefore grows like ``N^(n(1/p - 1/2) + 1/q)``,
which rules out the inhomogeneous estimate whenever that exponent is
non-negative.

All space-time values at large ``t`` are computed from the radial
reduction::

    int exp(i x.xi) g(|xi|) d xi = (2 pi)^(n/2) int g(rho) S(|x| rho) rho^(n-1) d rho,

``S(z) = z^-nu J_nu(z)``, with a composite Gauss-Legendre rule sized for
the phase rate ``t a 2^(a-1) + |x|``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .bessel import bessel_j_scaled_array
from .exponents import ProblemParams
from .norms import NormSpec, mixed_spacetime_norm
from .propagator import DEFAULT_CUTOFF, CutoffSpec, SpaceTimeField, duhamel_integral
from .quadrature import composite_rule, gauss_legendre, time_mesh
from .radial_transform import Domain, SpectralProfile, hankel_inverse, sphere_area

BUMP_SUPPORT = (1.0, 2.0)
# non-analytic points of the bump: its two transitions meet at 4/3
BUMP_EDGES = np.concatenate([np.linspace(1.0, 4.0 / 3.0, 5)[:-1], np.linspace(4.0 / 3.0, 2.0, 9)])
CRITICAL_RADIUS = 1.5
# |x|/t cone used for the growth norm: critical radii in (5/4, 7/4)
CONE_RADII = (1.25, 1.75)
# the physical bump decays slowly; this extent keeps its tail below 1e-8
COUNTEREXAMPLE_DOMAIN = (256.0, 8.0)
DEFAULT_WINDOWS = tuple(np.geomspace(1e2, 10 ** 4.5, 6))
VERDICT_MARGIN = 0.05


class GrowthFitError(RuntimeError):
    """The log-log fit of the window norms is not linear enough to trust."""


# ---------------------------------------------------------------------------
# the forcing


def unit_time_integral(rho, alpha: float) -> np.ndarray:
    """``int_0^1 exp(-i s rho^a) ds = (exp(-i rho^a) - 1) / (-i rho^a)``, equal to 1 at 0."""
    x = np.asarray(rho, dtype=float) ** float(alpha)
    out = np.ones_like(x, dtype=complex)
    nz = x > 1e-8
    out[nz] = (np.exp(-1j * x[nz]) - 1.0) / (-1j * x[nz])
    out[~nz] = 1.0 - 0.5j * x[~nz]
    return out


def unit_time_integral_quadrature(rho, alpha: float, order: int = 40) -> np.ndarray:
    """The same integral by Gauss-Legendre quadrature in ``s`` (panels of phase at most 2)."""
    x = np.asarray(rho, dtype=float) ** float(alpha)
    panels = max(1, int(math.ceil(float(np.max(x, initial=0.0)) / 2.0)))
    out = np.zeros_like(x, dtype=complex)
    for a, b in zip(np.linspace(0, 1, panels + 1)[:-1], np.linspace(0, 1, panels + 1)[1:]):
        s, w = gauss_legendre(a, b, order)
        out += np.exp(-1j * np.multiply.outer(x, s)) @ w
    return out


def forcing_spectrum(rho, cutoff: CutoffSpec = DEFAULT_CUTOFF) -> np.ndarray:
    return cutoff.bump(rho)


def omega_weight(rho, alpha: float, cutoff: CutoffSpec = DEFAULT_CUTOFF) -> np.ndarray:
    """Amplitude left after integrating the forcing over ``0 < s < 1``."""
    return cutoff.bump(rho) * unit_time_integral(rho, alpha)


def build_counterexample(params: ProblemParams, domain: Domain | None = None, *, span: float = 2.0,
                         panels_per_unit: int = 2, order: int = 16,
                         cutoff: CutoffSpec = DEFAULT_CUTOFF) -> SpaceTimeField:
    """The forcing ``F(s) = 1_{(0,1)}(s) F^-1[bump]`` sampled on a time mesh over ``[0, span]``.

    ``s = 1`` is a panel edge, so the jump of the indicator falls between
    panels and the mesh quadrature stays exact.
    """
    if params.n < 2:
        raise ValueError("dimension must be at least 2")
    if span < 1:
        raise ValueError("span must cover the unit forcing interval")
    domain = domain or Domain(params.n, *COUNTEREXAMPLE_DOMAIN)
    panels = max(1, int(round(span * panels_per_unit)))
    if abs(panels / span - round(panels / span)) > 1e-12:
        raise ValueError("span * panels_per_unit must put a panel edge at s = 1")
    mesh = time_mesh(0.0, span, panels, order)
    spec = SpectralProfile(params.n, domain.rho_grid, forcing_spectrum(domain.rho_grid.nodes, cutoff))
    frame = hankel_inverse(spec, domain.r_grid).values
    on = (mesh.nodes < 1.0).astype(float)
    return SpaceTimeField(params, mesh.nodes, domain.r_grid, on[:, None] * frame[None, :], mesh=mesh)


def forcing_norm(F: SpaceTimeField, q_dual, p_dual) -> float:
    """``||F||`` in the dual space ``L^{q~'}_s L^{p~'}_y`` of the pair ``(q~, p~)``."""
    def conj(e):
        e = float(e)
        return math.inf if e == 1 else (1.0 if e == math.inf else e / (e - 1))
    return mixed_spacetime_norm(F, NormSpec(conj(q_dual), conj(p_dual)))


# ---------------------------------------------------------------------------
# radial reduction of the oscillatory integral


def _rho_rule(bandwidth: float, edges=BUMP_EDGES) -> tuple[np.ndarray, np.ndarray]:
    return composite_rule(edges, bandwidth + 8.0, min_order=16)


def oscillatory_integral(params: ProblemParams, t: float, radii, *, omega=None, edges=BUMP_EDGES
                         ) -> np.ndarray:
    """``I(t, |x|) = int exp(i x.xi + i t |xi|^a) omega(|xi|) d xi`` at every radius."""
    n, a = params.n, float(params.alpha)
    nu = params.nu
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    omega = omega or (lambda rho: omega_weight(rho, a))
    rho_top = float(edges[-1])
    rate = abs(t) * a * rho_top ** (a - 1) + float(radii.max(initial=0.0))
    rho, w = _rho_rule(rate, edges)
    amp = w * np.exp(1j * t * rho ** a) * omega(rho) * rho ** (n - 1)
    S = bessel_j_scaled_array(nu, np.multiply.outer(radii, rho))
    return (2 * math.pi) ** (n / 2) * (S @ amp)


def solution_values(params: ProblemParams, t: float, radii) -> np.ndarray:
    """The Duhamel solution ``u(|x|, t)`` for ``t >= 1`` by the radial reduction."""
    if t < 1:
        raise ValueError("the closed form needs t >= 1 (forcing switched off)")
    return -1j * (2 * math.pi) ** (-params.n) * oscillatory_integral(params, t, radii)


def duhamel_crosscheck(params: ProblemParams, t: float = 1.5, domain: Domain | None = None) -> float:
    """Max relative gap between the closed form and the propagator's Duhamel integral.

    Done at a moderate ``t`` where the solution still fits on ``domain``.
    """
    domain = domain or Domain(params.n, *COUNTEREXAMPLE_DOMAIN)
    F = build_counterexample(params, domain, span=max(2.0, math.ceil(t)))
    u = duhamel_integral(F, t)
    ref = solution_values(params, t, u.grid.nodes)
    return float(np.max(np.abs(u.values - ref)) / np.max(np.abs(ref)))


# ---------------------------------------------------------------------------
# stationary-phase probe


def cone_speed(alpha: float, rho0: float) -> float:
    """``|x| / t`` at which ``rho0`` is the critical radius of ``x.xi / t + |xi|^a``."""
    return alpha * rho0 ** (alpha - 1)


def critical_radius(alpha: float, x_over_t: float) -> float:
    return (x_over_t / alpha) ** (1.0 / (alpha - 1))


@dataclass
class DecayFit:
    t_values: list
    magnitudes: list
    normalized: list
    x_over_t: float
    critical_radius: float
    slope: float
    variation: float

    def as_dict(self) -> dict:
        return asdict(self)


def stationary_phase_probe(params: ProblemParams, t_values, x_over_t: float | None = None, *,
                           omega=None, require_critical: bool = True) -> DecayFit:
    """``|I(t, t x_over_t)|`` along a ray, with ``|I| t^(n/2)`` and the log-log slope.

    ``variation`` is ``max / min - 1`` of the normalized values.  By default
    the ray is the cone through the middle of the bump (critical radius 3/2).
    """
    a, n = float(params.alpha), params.n
    if x_over_t is None:
        x_over_t = cone_speed(a, CRITICAL_RADIUS)
    rho0 = critical_radius(a, x_over_t)
    inside = BUMP_SUPPORT[0] < rho0 < BUMP_SUPPORT[1]
    if require_critical and not inside:
        raise ValueError(f"critical radius {rho0:.4g} lies outside the bump support {BUMP_SUPPORT}")
    t_values = np.asarray(t_values, dtype=float)
    mags = np.array([abs(oscillatory_integral(params, t, [t * x_over_t], omega=omega)[0])
                     for t in t_values])
    normed = mags * t_values ** (n / 2)
    pos = t_values > 0
    slope = float(np.polyfit(np.log(t_values[pos]), np.log(mags[pos]), 1)[0]) if pos.sum() > 1 else float("nan")
    variation = float(normed.max() / normed.min() - 1.0) if normed.min() > 0 else math.inf
    return DecayFit(t_values.tolist(), mags.tolist(), normed.tolist(), float(x_over_t), float(rho0),
                    slope, variation)


def small_time_limit(params: ProblemParams) -> float:
    """``|int omega d xi|``, the value of ``|I|`` at ``t = 0``, ``x = 0``."""
    rho, w = _rho_rule(0.0)
    return float(abs(sphere_area(params.n) * np.sum(w * omega_weight(rho, float(params.alpha))
                                                    * rho ** (params.n - 1))))


# ---------------------------------------------------------------------------
# growth of the window norms


@dataclass
class WindowSamples:
    """``|u|`` on a product rule over ``N < t < 2N`` and ``|x| = v t``, ``v`` in the cone."""

    N: float
    t: np.ndarray
    t_weights: np.ndarray
    v: np.ndarray
    v_weights: np.ndarray
    magnitude: np.ndarray  # [len(t), len(v)]

    def norm(self, q: float, p: float, n: int) -> float:
        q, p = float(q), float(p)
        if p == math.inf:
            inner = self.magnitude.max(axis=1)
        else:
            # dx = |S| r^(n-1) dr with r = v t
            meas = sphere_area(n) * self.v_weights[None, :] * self.v[None, :] ** (n - 1) * self.t[:, None] ** n
            inner = np.sum(meas * self.magnitude ** p, axis=1) ** (1.0 / p)
        if q == math.inf:
            return float(inner.max())
        return float(np.sum(self.t_weights * inner ** q) ** (1.0 / q))


def cone_bounds(alpha: float, radii=CONE_RADII) -> tuple[float, float]:
    return cone_speed(alpha, radii[0]), cone_speed(alpha, radii[1])


def window_samples(params: ProblemParams, N: float, *, t_order: int = 16, v_order: int = 24,
                   radii=CONE_RADII) -> WindowSamples:
    a = float(params.alpha)
    lo, hi = cone_bounds(a, radii)
    t, tw = gauss_legendre(N, 2 * N, t_order)
    v, vw = gauss_legendre(lo, hi, v_order)
    mag = np.stack([np.abs(solution_values(params, ti, ti * v)) for ti in t])
    return WindowSamples(float(N), t, tw, v, vw, mag)


@dataclass
class GrowthFit:
    q: float
    p: float
    windows: list
    norms: list
    fitted_slope: float
    predicted_slope: float
    residual: float
    verdict: str

    @property
    def divergent(self) -> bool:
        return self.verdict == "estimate impossible"

    def as_dict(self) -> dict:
        return asdict(self)


def predicted_slope(n: int, q, p) -> float:
    q, p = float(q), float(p)
    return n * (1.0 / p - 0.5) + (0.0 if q == math.inf else 1.0 / q)


def fit_growth(samples: list[WindowSamples], n: int, q, p, *, max_residual: float = 0.05,
               margin: float = VERDICT_MARGIN) -> GrowthFit:
    """Slope of ``log ||u||_window`` against ``log N`` from precomputed window samples."""
    if len(samples) < 4:
        raise ValueError("need at least four windows")
    Ns = np.array([s.N for s in samples])
    ratios = Ns[1:] / Ns[:-1]
    if not np.allclose(ratios, ratios[0], rtol=1e-6):
        raise ValueError("windows must be geometrically spaced")
    norms = np.array([s.norm(q, p, n) for s in samples])
    coef = np.polyfit(np.log(Ns), np.log(norms), 1)
    resid = float(np.max(np.abs(np.polyval(coef, np.log(Ns)) - np.log(norms))))
    if resid > max_residual:
        raise GrowthFitError(f"log-log residual {resid:.3g} above {max_residual:g}")
    slope = float(coef[0])
    verdict = "estimate impossible" if slope >= -margin else "consistent"
    return GrowthFit(float(q), float(p), Ns.tolist(), norms.tolist(), slope,
                     predicted_slope(n, q, p), resid, verdict)


def growth_exponent_fit(params: ProblemParams, q, p, N_list=DEFAULT_WINDOWS, **kw) -> GrowthFit:
    samples = [window_samples(params, N) for N in N_list]
    return fit_growth(samples, params.n, q, p, **kw)


def growth_grid(params: ProblemParams, inv_q, inv_p, N_list=DEFAULT_WINDOWS, *, pool=None) -> list[GrowthFit]:
    """Fits for every ``(1/q, 1/p)`` pair, sharing one set of window samples."""
    mapper = pool.map if pool is not None else map
    samples = list(mapper(_window_job, [(params, float(N)) for N in N_list]))
    out = []
    for iq in inv_q:
        for ip in inv_p:
            q = math.inf if float(iq) == 0 else 1.0 / float(iq)
            p = math.inf if float(ip) == 0 else 1.0 / float(ip)
            out.append(fit_growth(samples, params.n, q, p))
    return out


def _window_job(args):
    params, N = args
    return window_samples(params, N)


def verdicts_monotone(fits: list[GrowthFit]) -> bool:
    """Divergence at ``(1/q, 1/p)`` implies divergence at every larger pair."""
    for f in fits:
        if not f.divergent:
            continue
        for g in fits:
            if 1 / g.q >= 1 / f.q - 1e-12 and 1 / g.p >= 1 / f.p - 1e-12 and not g.divergent:
                return False
    return True
