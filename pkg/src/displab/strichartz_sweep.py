"""Sampled norm ratios for the homogeneous and inhomogeneous Strichartz estimates.

Every ratio is a lower bound on an operator norm computed from a finite
family of radial test functions.  Space-time norms run over the window
``[0, 32]`` in time, split into dyadic panels, and the remaining
``int_W^inf ||u(t)||_p^q dt`` is extrapolated from the last two panels with
the dispersive power law ``||u(t)||_p^q ~ C t^-b (1 + d/t)``, where
``b = q n (1/2 - 1/p)``.

Members are defined through their spectra, so the dilate ``f(eps x)`` has
spectrum ``eps^-n g(rho / eps)`` and is sampled on the same grid as ``f``:
the dilation checks never rescale a grid.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .exponents import ProblemParams, homogeneous_endpoint, reciprocal
from .norms import NormSpec, Weight, mixed_spacetime_norm, sobolev_norm, space_norms
from .propagator import SpaceTimeField, duhamel_field, evolution_grid, evolve_stack
from .quadrature import gauss_legendre, panels_for_phase, time_mesh
from .radial_transform import Domain, RadialProfile, SpectralProfile, hankel_forward, hankel_inverse

WINDOW = 32.0
TAIL_LIMIT = 0.5
SPECTRAL_FLOOR = 1e-10


class TailError(RuntimeError):
    """The extrapolated time tail is too large (or not integrable) for the window."""


# ---------------------------------------------------------------------------
# test families


class Generator(str, Enum):
    GAUSSIAN_SCALES = "gaussian_scales"
    MODULATED_BUMPS = "modulated_bumps"
    DYADIC_PACKETS = "dyadic_packets"
    RANDOM_SPECTRAL = "random_spectral"


def _even_gaussian(rho, center, width):
    return np.exp(-0.5 * ((rho - center) / width) ** 2) + np.exp(-0.5 * ((rho + center) / width) ** 2)


@dataclass(frozen=True)
class Member:
    """A radial test function given by its spectrum ``sum_i amp_i * atom_i(rho)``."""

    kind: Generator
    atoms: tuple  # (amplitude, center, width) triples; meaning depends on ``kind``
    label: str = ""

    def spectrum(self, rho, dim: int, eps: float = 1.0) -> np.ndarray:
        """Spectrum of ``x -> f(eps x)``."""
        x = np.asarray(rho, dtype=float) / eps
        out = np.zeros_like(x, dtype=complex)
        for amp, c, w in self.atoms:
            if self.kind == Generator.GAUSSIAN_SCALES:
                # f = exp(-r^2 / (2 c^2)); its transform is (2 pi c^2)^(n/2) exp(-c^2 rho^2 / 2)
                out += amp * (2 * math.pi * c * c) ** (dim / 2) * np.exp(-0.5 * (c * x) ** 2)
            elif self.kind == Generator.DYADIC_PACKETS:
                with np.errstate(divide="ignore"):
                    lx = np.where(x > 0, np.log2(np.maximum(x, 1e-300)), -np.inf)
                out += amp * np.exp(-0.5 * ((lx - c) / w) ** 2)
            else:
                out += amp * _even_gaussian(x, c, w)
        return out * eps ** (-dim)

    def extent(self, floor: float = SPECTRAL_FLOOR) -> float:
        """Radius beyond which the (undilated) spectrum stays below ``floor`` times its peak."""
        s = math.sqrt(-2 * math.log(floor))
        top = 0.0
        for _, c, w in self.atoms:
            if self.kind == Generator.GAUSSIAN_SCALES:
                top = max(top, s / c)
            elif self.kind == Generator.DYADIC_PACKETS:
                top = max(top, 2.0 ** (c + s * w))
            else:
                top = max(top, c + s * w)
        return top


@dataclass(frozen=True)
class TestFamily:
    """A finite family of radial members; ``size`` members drawn from ``ranges``.

    ``ranges`` holds ``(lo, hi)`` for the scale/centre parameter.  Random
    members use ``numpy.random.default_rng(seed)`` (PCG64).
    """

    generator: Generator = Generator.MODULATED_BUMPS
    size: int = 4
    ranges: tuple = (1.0, 2.0)
    width: float = 0.6
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "generator", Generator(self.generator))
        if self.size < 1:
            raise ValueError("family size must be positive")

    def members(self) -> list[Member]:
        lo, hi = self.ranges
        g = self.generator
        if g == Generator.RANDOM_SPECTRAL:
            rng = np.random.default_rng(self.seed)
            out = []
            for i in range(self.size):
                atoms = tuple((complex(rng.normal(), rng.normal()), float(rng.uniform(lo, hi)),
                               float(rng.uniform(0.6, 1.4) * self.width)) for _ in range(3))
                out.append(Member(g, atoms, f"random-{self.seed}-{i}"))
            return out
        if self.size == 1:
            vals = np.array([0.5 * (lo + hi) if g == Generator.DYADIC_PACKETS else math.sqrt(lo * hi)])
        elif g == Generator.DYADIC_PACKETS:
            # centres are log2 frequencies, so spread them linearly
            vals = np.linspace(lo, hi, self.size)
        else:
            vals = np.geomspace(lo, hi, self.size)
        return [Member(g, ((1.0, float(v), float(self.width)),), f"{g.value}-{v:.4g}") for v in vals]

    def enlarged(self, factor: int = 4) -> "TestFamily":
        return TestFamily(self.generator, self.size * factor, self.ranges, self.width, self.seed)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["rng"] = "numpy.default_rng/PCG64"
        return d


def domain_for(params: ProblemParams, extent: float, window: float = WINDOW) -> Domain:
    """Grids large enough that waves at frequency ``extent`` stay inside for ``t <= window``."""
    a = float(params.alpha)
    reach = window * a * extent ** (a - 1)
    r_max = 2.0 ** math.ceil(math.log2(max(64.0, 1.25 * reach / 0.9)))
    rho_max = math.ceil(1.1 * extent + 1.0)
    return Domain(params.n, r_max, rho_max)


def member_profile(member: Member, domain: Domain, eps: float = 1.0) -> RadialProfile:
    rg = domain.rho_grid
    spec = SpectralProfile(domain.dim, rg, member.spectrum(rg.nodes, domain.dim, eps))
    return hankel_inverse(spec, domain.r_grid)


# ---------------------------------------------------------------------------
# time norms with a tail


def dyadic_time_rule(t0: float, window: float = WINDOW, order: int = 16, first: float = 0.5):
    """Gauss-Legendre panels ``[t0, ..., W/4, W/2, W]`` refined geometrically toward ``t0``."""
    edges = [window]
    while edges[-1] / 2 > max(t0, first) + 1e-12:
        edges.append(edges[-1] / 2)
    if t0 < edges[-1] - 1e-12:
        edges.append(t0)
    edges = edges[::-1]
    xs, ws = zip(*(gauss_legendre(a, b, order) for a, b in zip(edges[:-1], edges[1:])))
    return np.concatenate(xs), np.concatenate(ws), np.array(edges)


def decay_exponent(n: int, q: float, p: float) -> float:
    """``b`` in ``||u(t)||_p^q ~ t^-b`` for frequency-localized free waves."""
    return q * n * (0.5 - 1.0 / p)


@dataclass
class TimeNorm:
    value: float
    window_part: float
    tail: float
    tail_fraction: float
    decay: float


def time_norm_with_tail(t: np.ndarray, w: np.ndarray, g: np.ndarray, q: float, n: int, p: float,
                        window: float, *, edges: np.ndarray, tail_limit: float = TAIL_LIMIT) -> TimeNorm:
    """``(int_0^inf g^q dt)^(1/q)`` from samples ``g(t) = ||u(t)||_p`` on ``[0, window]``.

    For ``q = inf`` the window maximum is returned (the free flow decays).
    """
    if q == math.inf:
        m = float(np.max(g))
        return TimeNorm(m, m, 0.0, 0.0, math.inf)
    gq = g ** q
    inside = float(np.sum(w * gq))
    b = decay_exponent(n, q, p)
    if not b > 1:
        raise TailError(f"time tail not integrable: decay exponent b={b:.3g} <= 1")
    sel = t >= edges[-3]
    tt = t[sel]
    y = np.log(np.maximum(gq[sel], 1e-300)) + b * np.log(tt)
    # y = log C + log(1 + d/t) ~ c0 + c1 / t
    c1, c0 = np.polyfit(1.0 / tt, y, 1)
    C, d = math.exp(c0), c1
    W = window
    tail = C * (W ** (1 - b) / (b - 1) + d * W ** (-b) / b)
    tail = max(tail, 0.0)
    total = inside + tail
    frac = tail / total if total > 0 else 0.0
    if frac > tail_limit:
        raise TailError(f"extrapolated tail carries {frac:.2f} of the time integral (limit {tail_limit})")
    return TimeNorm(total ** (1.0 / q), inside ** (1.0 / q), tail, frac, b)


# ---------------------------------------------------------------------------
# homogeneous ratios


@dataclass
class RatioResult:
    label: str
    eps: float
    numerator: float
    denominator: float
    tail_fraction: float

    @property
    def ratio(self) -> float:
        return self.numerator / self.denominator

    def as_row(self) -> dict:
        d = asdict(self)
        d["ratio"] = self.ratio
        return d


def homogeneous_ratio(params: ProblemParams, q, p, member: Member, domain: Domain, eps: float = 1.0,
                      window: float = WINDOW, order: int = 16) -> RatioResult:
    """``||exp(i t L) f||_{L^q_t L^p_x} / ||f||_{H^gamma}`` for ``f = member(eps x)``."""
    q, p = float(q), float(p)
    f = member_profile(member, domain, eps)
    t, w, edges = dyadic_time_rule(0.0, window, order)
    frames = evolve_stack(f, t, params)
    field_ = SpaceTimeField(params, t, f.grid, frames, w)
    g = space_norms(field_, p, Weight.EUCLIDEAN)
    tn = time_norm_with_tail(t, w, g, q, params.n, p, window, edges=edges)
    den = sobolev_norm(f, float(params.gamma))
    return RatioResult(member.label, eps, tn.value, den, tn.tail_fraction)


def homogeneous_drift(params: ProblemParams, q, p) -> float:
    """Predicted exponent of ``eps`` in the homogeneous ratio: ``n/2 - gamma - alpha/q - n/p``."""
    iq, ip = float(reciprocal(q)), float(reciprocal(p))
    return params.n / 2 - float(params.gamma) - float(params.alpha) * iq - params.n * ip


def inhomogeneous_drift(params: ProblemParams, q, p, qd, pd) -> float:
    """Predicted exponent ``-alpha (1/q + 1/q~) + n (1 - 1/p - 1/p~)``."""
    iq, ip, iqd, ipd = (float(reciprocal(x)) for x in (q, p, qd, pd))
    return -float(params.alpha) * (iq + iqd) + params.n * (1 - ip - ipd)


@dataclass
class DriftFit:
    eps: list
    ratios: list
    fitted: float
    predicted: float

    @property
    def error(self) -> float:
        return abs(self.fitted - self.predicted)


def _fit_drift(eps, ratios, predicted) -> DriftFit:
    slope = float(np.polyfit(np.log(eps), np.log(ratios), 1)[0])
    return DriftFit(list(map(float, eps)), list(map(float, ratios)), slope, float(predicted))


def homogeneous_dilation(params: ProblemParams, q, p, member: Member, eps=(0.8, 1.0, 1.25), **kw) -> DriftFit:
    domain = domain_for(params, member.extent() / min(eps), kw.get("window", WINDOW))
    ratios = [homogeneous_ratio(params, q, p, member, domain, e, **kw).ratio for e in eps]
    return _fit_drift(eps, ratios, homogeneous_drift(params, q, p))


def endpoint_warning(params: ProblemParams, q, p) -> str | None:
    eq, ep = homogeneous_endpoint(params.n)
    crit = (2 * params.n) / (2 * params.n - 1)
    if abs(float(params.alpha) - crit) < 1e-12 and abs(float(q) - float(eq)) < 1e-12 \
            and abs(float(p) - float(ep)) < 1e-12:
        return "endpoint-open: ratios recorded only, no verdict"
    return None


@dataclass
class SweepSummary:
    kind: str
    exponents: dict
    family: dict
    rows: list = field(default_factory=list)
    max_ratio: float = 0.0
    warnings: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def _map(pool, fn, items):
    return list(pool.map(fn, items)) if pool is not None else [fn(x) for x in items]


def _homogeneous_job(args):
    params, q, p, member, domain = args
    return homogeneous_ratio(params, q, p, member, domain)


def homogeneous_ratio_sweep(params: ProblemParams, q, p, family: TestFamily, *, pool=None) -> SweepSummary:
    members = family.members()
    domain = domain_for(params, max(m.extent() for m in members))
    live = [m for m in members if any(a != 0 for a, _, _ in m.atoms)]
    results = _map(pool, _homogeneous_job, [(params, q, p, m, domain) for m in live])
    rows = sorted((r.as_row() for r in results), key=lambda r: r["label"])
    warn = [w for w in (endpoint_warning(params, q, p),) if w]
    return SweepSummary("homogeneous", {"q": float(q), "p": float(p), "gamma": float(params.gamma)},
                        family.as_dict(), rows, max(r["ratio"] for r in rows), warn)


# ---------------------------------------------------------------------------
# inhomogeneous ratios


def time_profile(s) -> np.ndarray:
    """``sin(pi s)^2`` on ``[0, 1]``: the temporal shape of every test forcing."""
    s = np.asarray(s, dtype=float)
    return np.where((s >= 0) & (s <= 1), np.sin(math.pi * s) ** 2, 0.0)


def _forcing_field(params, f: RadialProfile, span: float, eps: float, order: int) -> SpaceTimeField:
    """``F(x, s) = tau(eps^a s) f(x)`` on a mesh over ``[0, span]``."""
    a = float(params.alpha)
    g = hankel_forward(f, evolution_grid(f.grid))
    rho_sig = float(np.max(g.rho[np.abs(g.values) > SPECTRAL_FLOOR * np.abs(g.values).max()]))
    panels = max(4, panels_for_phase(0.0, span, rho_sig ** a, order))
    mesh = time_mesh(0.0, span, panels, order)
    vals = time_profile(mesh.nodes * eps ** a)[:, None] * f.values[None, :]
    return SpaceTimeField(params, mesh.nodes, f.grid, vals, mesh=mesh)


@dataclass
class InhomogeneousPieces:
    retarded: TimeNorm
    full: TimeNorm
    forcing_norm: float


def _conj(e: float) -> float:
    return math.inf if e == 1 else (1.0 if e == math.inf else e / (e - 1))


def _after_forcing(params, u_end: RadialProfile, span: float, window: float, order: int):
    t, w, edges = dyadic_time_rule(span, window, order)
    return t, w, edges, evolve_stack(u_end, t - span, params)


def inhomogeneous_pieces(params: ProblemParams, q, p, qd, pd, member: Member, domain: Domain,
                         eps: float = 1.0, window: float = WINDOW, order: int = 16) -> InhomogeneousPieces:
    """Norms of the retarded and the full (``int_0^span``) Duhamel integrals and of the forcing."""
    q, p, qd, pd = map(float, (q, p, qd, pd))
    a = float(params.alpha)
    span = eps ** (-a)
    f = member_profile(member, domain, eps)
    if not np.any(f.values):
        # null member: nothing to propagate, the ratio is 0/0 and the sweep skips it
        zero = TimeNorm(0.0, 0.0, 0.0, 0.0, decay_exponent(params.n, q, p))
        return InhomogeneousPieces(zero, zero, 0.0)
    F = _forcing_field(params, f, span, eps, order)
    fnorm = mixed_spacetime_norm(F, NormSpec(_conj(qd), _conj(pd)))
    # retarded integral on the forcing mesh, then free flow
    D = duhamel_field(F)
    u_end = RadialProfile(params.n, f.grid, D.at([span])[0])
    t2, w2, edges, frames2 = _after_forcing(params, u_end, span, window, order)
    # full integral: -i exp(i t L) int_0^span exp(-i s L) F(s) ds, identical to D after span
    rg = evolution_grid(f.grid)
    fh = hankel_forward(f, rg)
    tau = time_profile(F.mesh.nodes * eps ** a)
    sym = rg.nodes ** a
    acc = (F.mesh.weights * tau) @ np.exp(-1j * np.multiply.outer(F.mesh.nodes, sym))
    G = SpectralProfile(params.n, rg, -1j * acc * fh.values)
    full0 = hankel_inverse(G, f.grid)
    full_in = evolve_stack(full0, F.mesh.nodes, params)
    full_out = evolve_stack(full0, t2, params)

    def norm(frames_in, frames_out):
        t = np.concatenate([F.mesh.nodes, t2])
        w = np.concatenate([F.mesh.weights, w2])
        vals = np.concatenate([frames_in, frames_out])
        g = space_norms(SpaceTimeField(params, t, f.grid, vals, w), p)
        return time_norm_with_tail(t, w, g, q, params.n, p, window, edges=edges)

    return InhomogeneousPieces(norm(D.values, frames2), norm(full_in, full_out), fnorm)


def inhomogeneous_ratio(params, q, p, qd, pd, member, domain, eps: float = 1.0, **kw) -> RatioResult:
    pc = inhomogeneous_pieces(params, q, p, qd, pd, member, domain, eps, **kw)
    return RatioResult(member.label, eps, pc.retarded.value, pc.forcing_norm, pc.retarded.tail_fraction)


def inhomogeneous_dilation(params: ProblemParams, q, p, qd, pd, member: Member, eps=(0.8, 1.0, 1.25),
                           **kw) -> DriftFit:
    domain = domain_for(params, member.extent() / min(eps), kw.get("window", WINDOW))
    ratios = [inhomogeneous_ratio(params, q, p, qd, pd, member, domain, e, **kw).ratio for e in eps]
    return _fit_drift(eps, ratios, inhomogeneous_drift(params, q, p, qd, pd))


def _inhomogeneous_job(args):
    params, q, p, qd, pd, member, domain = args
    pc = inhomogeneous_pieces(params, q, p, qd, pd, member, domain)
    return member.label, pc


def inhomogeneous_ratio_sweep(params: ProblemParams, q, p, qd, pd, family: TestFamily, *,
                              pool=None) -> SweepSummary:
    """Retarded ratios over the family, with the full-integral ratio alongside."""
    members = family.members()
    domain = domain_for(params, max(m.extent() for m in members))
    out = _map(pool, _inhomogeneous_job, [(params, q, p, qd, pd, m, domain) for m in members])
    rows = []
    for label, pc in out:
        if pc.forcing_norm == 0:
            continue
        rows.append({"label": label, "ratio": pc.retarded.value / pc.forcing_norm,
                     "full_ratio": pc.full.value / pc.forcing_norm,
                     "retarded_over_full": pc.retarded.value / pc.full.value,
                     "tail_fraction": pc.retarded.tail_fraction})
    rows.sort(key=lambda r: r["label"])
    ex = {"q": float(q), "p": float(p), "q_dual": float(qd), "p_dual": float(pd)}
    return SweepSummary("inhomogeneous", ex, family.as_dict(), rows,
                        max((r["ratio"] for r in rows), default=0.0))


def family_growth(sweep_small: SweepSummary, sweep_large: SweepSummary) -> float:
    """``max ratio (large family) / max ratio (small family)``."""
    return sweep_large.max_ratio / sweep_small.max_ratio


def christ_kiselev_constant(sweep: SweepSummary) -> float:
    """Largest ``||retarded|| / ||full||`` over the family (the sampled transfer constant)."""
    return max(r["retarded_over_full"] for r in sweep.rows)


def boundary_growth(params: ProblemParams, q, p, N_list=None):
    """Window growth of the unit-time bump forcing at ``(q, p)`` (delegates to the sharpness fit)."""
    from .sharpness import DEFAULT_WINDOWS, growth_exponent_fit
    return growth_exponent_fit(params, q, p, DEFAULT_WINDOWS if N_list is None else N_list)
