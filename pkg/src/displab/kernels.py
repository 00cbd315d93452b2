"""Dyadic pieces of the radial inhomogeneous estimate and their oscillatory kernel.

For a radial forcing the frequency-localized Duhamel operator splits into
``T_j T_k^*`` with ``j`` indexing the output radius ``r ~ 2**j`` and ``k`` the
input radius ``lambda ~ 2**k`` (``j = 0`` means ``r < 1``)::

    T_j h(r, t)   = chi_j(r) r^-nu int exp(i t rho^a) J_nu(r rho) vphi(rho) h(rho) d rho
    T_k^* G(rho)  = vphi(rho) int exp(-i s rho^a) int chi_k(l) l^-nu J_nu(l rho) G(l, s) dl ds

with ``vphi(rho)**2 = rho * phi(rho)``.  The composition has kernel::

    K(r, l, t) = (r l)^-nu int exp(i t rho^a) J_nu(r rho) J_nu(l rho) rho phi(rho) d rho

Every ``rho``-integral runs over ``[1/2, 2]`` with a composite Gauss-Legendre
rule whose panel orders follow the largest phase rate
``r + l + |t| a 2**(a-1)``, so the oscillation is resolved instead of
being approximated by a Filon-type rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bessel import bessel_j_array, bessel_j_scaled_array, correction_coefficient
from .exponents import ProblemParams
from .propagator import DEFAULT_CUTOFF, CutoffSpec
from .quadrature import composite_rule, gauss_legendre, panels_for_phase

RHO_SUPPORT = (0.5, 2.0)
T_WINDOW = (1.0 / 8.0, 8.0)


@dataclass(frozen=True)
class DyadicIndex:
    j: int
    k: int

    def __post_init__(self):
        if int(self.j) != self.j or int(self.k) != self.k or self.j < 0 or self.k < 0:
            raise ValueError(f"dyadic indices must be non-negative integers, got ({self.j}, {self.k})")

    @property
    def m(self) -> int:
        return max(self.j, self.k)

    @property
    def gap(self) -> int:
        return abs(self.j - self.k)


def shell(j: int) -> tuple[float, float]:
    """Radial shell of index ``j``: ``(0, 1)`` for ``j = 0``, else ``[2**(j-1), 2**j)``."""
    return (0.0, 1.0) if j == 0 else (2.0 ** (j - 1), 2.0 ** j)


def in_shell(x, j: int) -> np.ndarray:
    a, b = shell(j)
    x = np.asarray(x, dtype=float)
    return (x > a) & (x < b) if j == 0 else (x >= a) & (x < b)


def shell_samples(j: int, num: int) -> np.ndarray:
    """``num`` midpoint samples across shell ``j``."""
    a, b = shell(j)
    return a + (b - a) * (np.arange(num) + 0.5) / num


def window(m: int) -> tuple[float, float]:
    """The time window ``(2**m / 8, 8 * 2**m)`` where stationary points can occur."""
    return T_WINDOW[0] * 2.0 ** m, T_WINDOW[1] * 2.0 ** m


def phase_rate(alpha: float, r_max: float, lam_max: float, t_max: float) -> float:
    """Largest ``|d/d rho|`` of the total phase over ``rho`` in ``[1/2, 2]``."""
    a = float(alpha)
    return r_max + lam_max + abs(t_max) * a * max(2.0 ** (a - 1), 0.5 ** (a - 1))


def rho_rule(bandwidth: float, *, min_order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on ``[1/2, 2]`` resolving ``exp(i bandwidth rho)``."""
    # twelve base panels: the cutoff transitions need them even without oscillation
    edges = np.linspace(RHO_SUPPORT[0], RHO_SUPPORT[1], 13)
    return composite_rule(edges, bandwidth + 8.0, min_order=min_order)


def _radial_factor(nu: float, x: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``x**-nu J_nu(x rho)`` as an array ``[len(x), len(rho)]`` (regular at ``x = 0``)."""
    z = np.multiply.outer(np.asarray(x, dtype=float), rho)
    return bessel_j_scaled_array(nu, z) * rho[None, :] ** nu


# ---------------------------------------------------------------------------
# the kernel


def kernel_block(params: ProblemParams, r, lam, t, *, cutoff: CutoffSpec = DEFAULT_CUTOFF,
                 radial=None, bandwidth: float | None = None) -> np.ndarray:
    """``K(r_a, l_b, t_c)`` for all sample combinations, shape ``[len(r), len(l), len(t)]``.

    ``radial(nu, x, rho)`` replaces the Bessel factor ``x**-nu J_nu(x rho)``;
    it is used to evaluate the pieces of the ``K_1 ... K_4`` split.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    alpha = float(params.alpha)
    nu = params.nu
    bw = bandwidth or phase_rate(alpha, r.max(), lam.max(), np.abs(t).max())
    rho, w = rho_rule(bw)
    amp = w * cutoff.kernel_weight(rho)
    radial = radial or _radial_factor
    A = radial(nu, r, rho)                     # [R, N]
    B = radial(nu, lam, rho) * amp[None, :]    # [L, N]
    E = np.exp(1j * np.multiply.outer(t, rho ** alpha))  # [T, N]
    # K[a, b, c] = sum_n A[a, n] B[b, n] E[c, n]
    AE = (A[:, None, :] * E[None, :, :]).reshape(-1, rho.size)
    K = (AE @ B.T).reshape(r.size, t.size, lam.size)
    return np.transpose(K, (0, 2, 1))


def kernel_K_eval(idx: DyadicIndex, r, lam, t, params: ProblemParams, *,
                  cutoff: CutoffSpec = DEFAULT_CUTOFF) -> np.ndarray:
    """``K(r, l, t)`` at broadcast-compatible points ``r``, ``l``, ``t``.

    ``r`` must lie in shell ``idx.j`` and ``l`` in shell ``idx.k``.
    """
    r, lam, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, lam, t)))
    if not np.all(in_shell(r, idx.j)):
        raise ValueError(f"r outside shell {shell(idx.j)} of j={idx.j}")
    if not np.all(in_shell(lam, idx.k)):
        raise ValueError(f"lambda outside shell {shell(idx.k)} of k={idx.k}")
    alpha = float(params.alpha)
    bw = phase_rate(alpha, float(r.max(initial=0)), float(lam.max(initial=0)), float(np.abs(t).max(initial=0)))
    rho, w = rho_rule(bw)
    amp = w * cutoff.kernel_weight(rho)
    nu = params.nu
    flat = [v.ravel() for v in (r, lam, t)]
    out = np.empty(flat[0].size, dtype=complex)
    chunk = max(1, 2_000_000 // rho.size)
    for s in range(0, out.size, chunk):
        rr, ll, tt = (v[s:s + chunk] for v in flat)
        integrand = (bessel_j_scaled_array(nu, np.multiply.outer(rr, rho))
                     * bessel_j_scaled_array(nu, np.multiply.outer(ll, rho))
                     * rho ** (2 * nu) * np.exp(1j * np.multiply.outer(tt, rho ** alpha)))
        out[s:s + chunk] = integrand @ amp
    return out.reshape(r.shape)


def kernel_modulus_bound(r, lam, params: ProblemParams, *, cutoff: CutoffSpec = DEFAULT_CUTOFF) -> np.ndarray:
    """``(r l)^-nu int |J_nu(r rho) J_nu(l rho)| rho phi(rho) d rho`` (bounds ``|K|`` for all ``t``)."""
    r, lam = np.broadcast_arrays(np.asarray(r, float), np.asarray(lam, float))
    rho, w = rho_rule(phase_rate(1.5, float(r.max()), float(lam.max()), 0.0))
    amp = w * cutoff.kernel_weight(rho)
    nu = params.nu
    vals = np.abs(bessel_j_scaled_array(nu, np.multiply.outer(r.ravel(), rho))
                  * bessel_j_scaled_array(nu, np.multiply.outer(lam.ravel(), rho))) * rho ** (2 * nu)
    return (vals @ amp).reshape(r.shape)


# ---------------------------------------------------------------------------
# pieces of the Bessel split


def bessel_remainder_array(nu: float, z: np.ndarray) -> np.ndarray:
    """``E_nu(z) = J_nu(z) - main_cos - correction_sin`` in double precision (``z > 1``).

    Adequate at the kernel scales (``z <= 2**10``), where ``|E| >= 1e-8``
    dominates the ``1e-16`` rounding of ``J``.
    """
    z = np.asarray(z, dtype=float)
    chi = z - nu * math.pi / 2 - math.pi / 4
    main = np.sqrt(2.0 / (math.pi * z)) * np.cos(chi)
    corr = -correction_coefficient(nu) * z ** -1.5 * np.sin(chi)
    rem = bessel_j_array(nu, z) - main - corr
    if nu in (0.5, 1.5):
        return np.zeros_like(rem)
    return rem


def remainder_factor(nu: float, x: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``x**-nu E_nu(x rho)``, the radial factor of the pure-remainder piece ``K_4``."""
    z = np.multiply.outer(np.asarray(x, dtype=float), rho)
    if np.any(z <= 1):
        raise ValueError("the remainder split needs x * rho > 1 (shells j, k >= 2)")
    return bessel_remainder_array(nu, z) * np.asarray(x, dtype=float)[:, None] ** -nu


def k4_bound_exponent(n: int) -> float:
    """Per-index decay ``(n + 3)/2`` of ``sup |K_4|``."""
    return (n + 3) / 2


def kernel_bound_exponent(n: int, j: int, k: int) -> float:
    """``log2`` of the uniform bound: ``-(2n-1)(j+k)/4 - |j-k|/4``."""
    return -(2 * n - 1) * (j + k) / 4 - abs(j - k) / 4


# ---------------------------------------------------------------------------
# sampled sup report


@dataclass(frozen=True)
class SamplingSpec:
    """Shell and time sampling of the sup report."""

    n_r: int = 32
    n_lam: int = 32
    n_t: int = 64
    t_outside_factor: float = 16.0

    def times(self, m: int) -> dict[str, np.ndarray]:
        lo, hi = window(m)
        inside = np.geomspace(lo, hi, self.n_t + 2)[1:-1]
        half = self.n_t // 2
        below = np.linspace(0.0, lo, half, endpoint=False)
        above = np.geomspace(hi, self.t_outside_factor * 2.0 ** m, self.n_t - half + 1)[1:]
        return {"window": inside, "outside": np.concatenate([below, above])}


@dataclass
class KernelDecayReport:
    params: ProblemParams
    sampling: SamplingSpec
    cells: dict = field(default_factory=dict)

    def normalized(self, j: int, k: int) -> float:
        return self.cells[(j, k)]["m"]

    def max_normalized(self, pairs) -> float:
        return max(self.cells[p]["m"] for p in pairs)

    def pairs(self, lo: int, hi: int, *, min_gap: int = 0) -> list[tuple[int, int]]:
        return sorted(p for p in self.cells if lo <= p[0] <= hi and lo <= p[1] <= hi
                      and abs(p[0] - p[1]) >= min_gap)

    def calibration_ratio(self, test=(2, 8), calib=(0, 3), *, min_gap: int = 0) -> float:
        """``max m`` over the test block divided by ``max m`` over the calibration block."""
        return (self.max_normalized(self.pairs(*test, min_gap=min_gap))
                / self.max_normalized(self.pairs(*calib, min_gap=min_gap)))

    def rows(self) -> list[dict]:
        return [{"j": j, "k": k, **{key: v for key, v in cell.items()}}
                for (j, k), cell in sorted(self.cells.items())]

    def diagonal_slope(self, lo: int = 2, hi: int = 8) -> float:
        """Least-squares slope of ``log2 sup|K|`` against ``j`` on ``j = k``."""
        js = [j for j in range(lo, hi + 1) if (j, j) in self.cells]
        y = [math.log2(self.cells[(j, j)]["sup"]) for j in js]
        return float(np.polyfit(js, y, 1)[0])


def dyadic_cell(params: ProblemParams, j: int, k: int, sampling: SamplingSpec = SamplingSpec(),
                cutoff: CutoffSpec = DEFAULT_CUTOFF) -> dict:
    """Sampled sup of ``|K|`` over both time regimes for one ``(j, k)``."""
    idx = DyadicIndex(j, k)
    r = shell_samples(j, sampling.n_r)
    lam = shell_samples(k, sampling.n_lam)
    out = {}
    for name, ts in sampling.times(idx.m).items():
        K = kernel_block(params, r, lam, ts, cutoff=cutoff)
        out[f"sup_{name}"] = float(np.abs(K).max())
    sup = max(out.values())
    n = params.n
    out["sup"] = sup
    out["m"] = sup * 2.0 ** (-kernel_bound_exponent(n, j, k))
    return out


def dyadic_sup_report(j_max: int, k_max: int, params: ProblemParams,
                      sampling: SamplingSpec = SamplingSpec(), *, j_min: int = 0,
                      cutoff: CutoffSpec = DEFAULT_CUTOFF, pool=None) -> KernelDecayReport:
    """Sampled ``sup |K|`` and the normalized ``m(j, k)`` for ``j_min <= j <= j_max``, same for ``k``.

    ``pool`` may be any object with a ``map`` method (e.g. a process pool);
    cells are merged in sorted ``(j, k)`` order.
    """
    if j_max > 10 or k_max > 10:
        raise ValueError("sampling budget exceeded: j_max, k_max <= 10")
    pairs = [(j, k) for j in range(j_min, j_max + 1) for k in range(j_min, k_max + 1)]
    args = [(params, j, k, sampling, cutoff) for j, k in pairs]
    mapper = pool.map if pool is not None else map
    results = list(mapper(_cell_star, args))
    report = KernelDecayReport(params, sampling)
    for (j, k), cell in sorted(zip(pairs, results)):
        report.cells[(j, k)] = cell
    return report


def _cell_star(args):
    return dyadic_cell(*args)


def k4_sup(params: ProblemParams, j: int, k: int, sampling: SamplingSpec = SamplingSpec(),
           cutoff: CutoffSpec = DEFAULT_CUTOFF) -> dict:
    """Sup of the pure-remainder piece ``K_4`` and its value normalized by ``2**((j+k)(n+3)/2)``."""
    if min(j, k) < 2:
        raise ValueError("K_4 is defined through the large-argument split (j, k >= 2)")
    r = shell_samples(j, sampling.n_r)
    lam = shell_samples(k, sampling.n_lam)
    sup = 0.0
    for ts in sampling.times(max(j, k)).values():
        K4 = kernel_block(params, r, lam, ts, cutoff=cutoff, radial=remainder_factor)
        sup = max(sup, float(np.abs(K4).max()))
    e = k4_bound_exponent(params.n)
    return {"j": j, "k": k, "sup": sup, "normalized": sup * 2.0 ** (e * (j + k))}


# ---------------------------------------------------------------------------
# reduced oscillatory integrals of the leading piece


def reduced_integral(alpha: float, c: np.ndarray, t: np.ndarray, *, cutoff: CutoffSpec = DEFAULT_CUTOFF
                     ) -> np.ndarray:
    """``I(c, t) = int exp(i t rho^a + i c rho) rho^-1 vphi^2(rho) d rho``, shape ``[len(t), len(c)]``."""
    c = np.atleast_1d(np.asarray(c, float))
    t = np.atleast_1d(np.asarray(t, float))
    bw = float(np.abs(c).max()) + float(np.abs(t).max()) * alpha * 2.0 ** abs(alpha - 1)
    rho, w = rho_rule(bw)
    amp = w * cutoff.phi(rho)
    Et = np.exp(1j * np.multiply.outer(t, rho ** alpha)) * amp[None, :]
    Ec = np.exp(1j * np.multiply.outer(c, rho))
    return Et @ Ec.T


def ibp_bound(alpha: float, c: np.ndarray, t: np.ndarray, *, cutoff: CutoffSpec = DEFAULT_CUTOFF
              ) -> np.ndarray:
    """The integration-by-parts majorant of ``|I(c, t)|`` (boundary terms vanish with the cutoff).

    ``int |a(a-1) t rho^(a-2) / psi'^2| phi + int |phi'| / |psi'|`` with
    ``psi' = c + a t rho^(a-1)``; infinite where ``psi'`` changes sign on the
    support.
    """
    c = np.atleast_1d(np.asarray(c, float))
    t = np.atleast_1d(np.asarray(t, float))
    rho, w = rho_rule(64.0)
    ph = cutoff.phi(rho)
    h = 1e-6
    dph = (cutoff.phi(rho + h) - cutoff.phi(rho - h)) / (2 * h)
    dpsi = c[None, :, None] + alpha * t[:, None, None] * rho[None, None, :] ** (alpha - 1)
    sign_change = (np.min(dpsi, axis=-1) <= 0) & (np.max(dpsi, axis=-1) >= 0)
    with np.errstate(divide="ignore"):
        term1 = np.abs(alpha * (alpha - 1) * t[:, None, None] * rho ** (alpha - 2) / dpsi ** 2) * ph
        term2 = np.abs(dph) / np.abs(dpsi)
    val = (term1 + term2) @ w
    return np.where(sign_change, np.inf, val)


def _c_samples(j: int, k: int, num: int) -> np.ndarray:
    """Samples of ``c = +-l +- r`` over the shells (both sign choices)."""
    r = shell_samples(j, num)
    lam = shell_samples(k, num)
    cs = np.concatenate([np.add.outer(lam, r).ravel(), np.subtract.outer(lam, r).ravel()])
    cs = np.concatenate([cs, -cs])
    return np.unique(np.round(cs, 12))


@dataclass
class SlopeFit:
    levels: list
    sups: list
    slope: float
    target: float
    tolerance: float
    bound_sups: list | None = None
    bound_slope: float | None = None

    @property
    def passed(self) -> bool:
        return abs(self.slope - self.target) <= self.tolerance

    def as_dict(self) -> dict:
        return {"levels": self.levels, "sups": self.sups, "slope": self.slope, "target": self.target,
                "tolerance": self.tolerance, "bound_sups": self.bound_sups,
                "bound_slope": self.bound_slope, "passed": self.passed}


def _fit(levels, sups) -> float:
    return float(np.polyfit(levels, np.log2(sups), 1)[0])


def vdc_regime_sups(params: ProblemParams, levels, *, n_shell: int = 24, n_t: int = 64,
                    cutoff: CutoffSpec = DEFAULT_CUTOFF) -> list[float]:
    """``sup |I(c, t)|`` with ``j = k = m`` and ``t`` inside the window, for each ``m``."""
    alpha = float(params.alpha)
    out = []
    for m in levels:
        lo, hi = window(m)
        ts = np.geomspace(lo, hi, n_t + 2)[1:-1]
        cs = _c_samples(m, m, n_shell)
        out.append(float(np.abs(reduced_integral(alpha, cs, ts, cutoff=cutoff)).max()))
    return out


def vdc_slope(params: ProblemParams, levels=range(7, 13), **kw) -> SlopeFit:
    """Fitted ``log2`` decay of the stationary-regime sup (expected ``-1/2``)."""
    levels = list(levels)
    sups = vdc_regime_sups(params, levels, **kw)
    return SlopeFit(levels, sups, _fit(levels, sups), -0.5, 0.1)


def nonstationary_sups(params: ProblemParams, levels, *, gap: int = 2, n_shell: int = 16, n_t: int = 64,
                       cutoff: CutoffSpec = DEFAULT_CUTOFF) -> tuple[list[float], list[float]]:
    """Sup of ``|I|`` and of its integration-by-parts majorant outside the window, ``k = j + gap``.

    ``levels`` are values of ``j``; the window is set by ``m = j + gap``.
    """
    alpha = float(params.alpha)
    sups, bounds = [], []
    for j in levels:
        k = j + gap
        lo, hi = window(k)
        half = n_t // 2
        ts = np.concatenate([np.linspace(0.0, lo, half, endpoint=False),
                             np.geomspace(hi, 16 * 2.0 ** k, n_t - half + 1)[1:]])
        cs = _c_samples(j, k, n_shell)
        sups.append(float(np.abs(reduced_integral(alpha, cs, ts, cutoff=cutoff)).max()))
        bounds.append(float(np.max(ibp_bound(alpha, cs, ts, cutoff=cutoff))))
    return sups, bounds


def nonstationary_slope(params: ProblemParams, levels=range(1, 8), *, gap: int = 2, **kw) -> SlopeFit:
    """Fitted ``log2`` decay against ``m = j + gap`` outside the window (bound: ``-1``)."""
    levels = list(levels)
    sups, bounds = nonstationary_sups(params, levels, gap=gap, **kw)
    ms = [j + gap for j in levels]
    finite = all(math.isfinite(b) for b in bounds)
    return SlopeFit(ms, sups, _fit(ms, sups), -1.0, 0.15, bounds, _fit(ms, bounds) if finite else math.inf)


# ---------------------------------------------------------------------------
# the operators T_j and T_k^*


def _shell_rule(j: int, bandwidth: float, min_order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    a, b = shell(j)
    return composite_rule([a, b], bandwidth, min_order=min_order)


@dataclass(frozen=True)
class ShellForcing:
    """A test function ``H(l, s)`` supported in shell ``k`` and ``s`` in ``span``."""

    func: object
    k: int
    span: tuple = (0.0, 1.0)


def _time_rule(t0: float, t1: float, omega: float, order: int = 16, phase_per_panel: float = 4.0):
    panels = panels_for_phase(t0, t1, omega, order, phase_per_panel)
    edges = np.linspace(t0, t1, panels + 1)
    xs, ws = zip(*(gauss_legendre(a, b, order) for a, b in zip(edges[:-1], edges[1:])))
    return np.concatenate(xs), np.concatenate(ws)


def _rho_for_operators(alpha: float, j: int, k: int, t_extent: float) -> tuple[np.ndarray, np.ndarray]:
    return rho_rule(phase_rate(alpha, shell(j)[1], shell(k)[1], t_extent))


def adjoint_apply(params: ProblemParams, H: ShellForcing, rho: np.ndarray, *,
                  cutoff: CutoffSpec = DEFAULT_CUTOFF, weighted: bool = True) -> np.ndarray:
    """``T_k^*`` applied to ``l**(n-1) H`` (or to ``H`` when ``weighted`` is false), at ``rho``."""
    alpha, nu, n = float(params.alpha), params.nu, params.n
    lam, wl = _shell_rule(H.k, 2.0 + 8.0)
    s, ws = _time_rule(*H.span, 2.0 ** alpha + 4.0)
    G = np.asarray(H.func(lam[None, :], s[:, None]), dtype=complex)  # [S, L]
    if weighted:
        G = G * lam[None, :] ** (n - 1)
    radial = _radial_factor(nu, lam, rho)              # [L, N]
    inner = (G * wl[None, :]) @ radial                 # [S, N]
    phase = np.exp(-1j * np.multiply.outer(s, rho ** alpha))
    vphi = np.sqrt(cutoff.kernel_weight(rho))
    return vphi * np.sum(ws[:, None] * phase * inner, axis=0)


def forward_apply(params: ProblemParams, h: np.ndarray, rho: np.ndarray, w_rho: np.ndarray,
                  r: np.ndarray, t: np.ndarray, *, cutoff: CutoffSpec = DEFAULT_CUTOFF,
                  chunk: int = 512) -> np.ndarray:
    """``T_j h`` at radii ``r`` (callers restrict them to a shell) and times ``t``: ``[T, R]``."""
    alpha, nu = float(params.alpha), params.nu
    A = _radial_factor(nu, r, rho) * (w_rho * np.sqrt(cutoff.kernel_weight(rho)) * h)[None, :]  # [R, N]
    out = np.empty((t.size, r.size), dtype=complex)
    for s in range(0, t.size, chunk):
        E = np.exp(1j * np.multiply.outer(t[s:s + chunk], rho ** alpha))
        out[s:s + chunk] = E @ A.T
    return out


def _mixed(values: np.ndarray, wt: np.ndarray, r: np.ndarray, wr: np.ndarray, n: int, q: float) -> float:
    """``L^q_t 𝔏^q_r`` of samples ``values[t, r]``."""
    mag = np.abs(values)
    if q == math.inf:
        return float(mag.max())
    return float(np.sum(wt[:, None] * wr[None, :] * r[None, :] ** (n - 1) * mag ** q) ** (1.0 / q))


def _dual(q: float) -> float:
    return math.inf if q == 1 else (1.0 if q == math.inf else q / (q - 1.0))


def apply_TjTk(H: ShellForcing, idx: DyadicIndex, params: ProblemParams, q: float, q_dual: float, *,
               cutoff: CutoffSpec = DEFAULT_CUTOFF, t_pad: float = 4.0, return_field: bool = False):
    """Sampled ratio ``||T_j T_k^*(l^(n-1) H)||_{L^q_t 𝔏^q_r} / ||H||_{L^q~'_t 𝔏^q~'_r}``.

    The output is evaluated for ``t`` in the span of ``H`` padded by
    ``t_pad * 2**max(j, k)``, outside of which the composed operator has no
    stationary points.  A lower bound on the operator norm.
    """
    if H.k != idx.k:
        raise ValueError("the test function must live in shell k")
    alpha, n = float(params.alpha), params.n
    pad = t_pad * 2.0 ** idx.m
    t0, t1 = H.span[0] - pad, H.span[1] + pad
    rho, wr_ = _rho_for_operators(alpha, idx.j, idx.k, max(abs(t0), abs(t1)))
    h = adjoint_apply(params, H, rho, cutoff=cutoff)
    # the output is only integrated (never interpolated): 12 radians per order-16 panel
    r, wr = _shell_rule(idx.j, 4.0)
    t, wt = _time_rule(t0, t1, 2.0 ** alpha, phase_per_panel=12.0)
    out = forward_apply(params, h, rho, wr_, r, t, cutoff=cutoff)
    num = _mixed(out, wt, r, wr, n, q)
    lam, wl = _shell_rule(H.k, 2.0 + 8.0)
    s, ws = _time_rule(*H.span, 2.0 ** alpha + 4.0)
    Hv = np.asarray(H.func(lam[None, :], s[:, None]), dtype=complex)
    den = _mixed(Hv, ws, lam, wl, n, _dual(q_dual))
    ratio = 0.0 if num == 0 else num / den
    if return_field:
        return ratio, (r, t, out)
    return ratio


def lemma_exponent(n: int, j: int, k: int, q: float, q_dual: float) -> float:
    """``log2`` of the dyadic operator bound for ``T_j T_k^*`` on ``L^q~' -> L^q``."""
    iq = 0.0 if q == math.inf else 1.0 / q
    iqd = 0.0 if q_dual == math.inf else 1.0 / q_dual
    return (j * ((2 * n + 1) * iq / 2 - (2 * n - 1) / 4) + k * ((2 * n + 1) * iqd / 2 - (2 * n - 1) / 4)
            - abs(j - k) / 2 * (0.5 - max(iq, iqd)))


def bilinear_form(params: ProblemParams, H: ShellForcing, Ht: ShellForcing, j: int, *,
                  cutoff: CutoffSpec = DEFAULT_CUTOFF, t_pad: float = 16.0) -> tuple[complex, complex]:
    """``<T_j T_k^* G, Gt>`` computed directly and through the adjoint ``<G, T_k T_j^* Gt>``.

    ``G = l^(n-1) H`` and ``Gt = r^(n-1) Ht``, pairing in ``dr dt``.  Both
    routes share no intermediate arrays: the first builds the output field of
    ``T_j T_k^*``, the second the spectral functions ``T_k^* G`` and
    ``T_j^* Gt`` and pairs them in ``rho``.
    """
    if Ht.k != j:
        raise ValueError("the second test function must live in shell j")
    alpha, n = float(params.alpha), params.n
    k = H.k
    m = max(j, k)
    pad = t_pad * 2.0 ** m
    # direct: evaluate T_j T_k^* G on a (r, t) rule covering supp Gt
    rho, wrho = _rho_for_operators(alpha, j, k, max(abs(Ht.span[0]), abs(Ht.span[1])) + pad)
    h = adjoint_apply(params, H, rho, cutoff=cutoff)
    r, wr = _shell_rule(j, 2.0 + 8.0)
    t, wt = _time_rule(*Ht.span, 2.0 ** alpha + 4.0)
    field_ = forward_apply(params, h, rho, wrho, r, t, cutoff=cutoff)
    Gt = np.asarray(Ht.func(r[None, :], t[:, None]), dtype=complex) * r[None, :] ** (n - 1)
    direct = complex(np.sum(wt[:, None] * wr[None, :] * field_ * np.conj(Gt)))
    # adjoint route: <T_k^* G, T_j^* Gt> in L^2(d rho)
    ht = adjoint_apply(params, Ht, rho, cutoff=cutoff)
    via_adjoint = complex(np.sum(wrho * h * np.conj(ht)))
    return direct, via_adjoint


# ---------------------------------------------------------------------------
# radial reduction


def dyadic_sum(params: ProblemParams, H: ShellForcing, j_max: int, r: np.ndarray, t: np.ndarray, *,
               k_max: int, cutoff: CutoffSpec = DEFAULT_CUTOFF) -> np.ndarray:
    """``sum_{j <= j_max, k <= k_max} T_j T_k^*(l^(n-1) H)`` at ``(t, r)``; shape ``[T, R]``.

    ``H.func`` is evaluated on every shell ``k`` in turn; radii outside
    ``[0, 2**j_max)`` get no contribution.
    """
    alpha = float(params.alpha)
    t_ext = float(np.max(np.abs(t))) + max(abs(H.span[0]), abs(H.span[1]))
    rho, wrho = rho_rule(phase_rate(alpha, 2.0 ** j_max, 2.0 ** k_max, t_ext))
    h = np.zeros(rho.size, dtype=complex)
    for k in range(k_max + 1):
        h += adjoint_apply(params, ShellForcing(H.func, k, H.span), rho, cutoff=cutoff)
    out = np.zeros((t.size, r.size), dtype=complex)
    for j in range(j_max + 1):
        sel = in_shell(r, j)
        if sel.any():
            out[:, sel] = forward_apply(params, h, rho, wrho, r[sel], t, cutoff=cutoff)
    return out
