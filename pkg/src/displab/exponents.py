"""Exponent conditions for radial fractional Schrödinger estimates.

Every condition is evaluated in exact rational arithmetic when the dispersion
order and the exponents are rational (``int``, ``Fraction`` or a rational
string such as ``"4/3"``).  Floats switch the comparison to a slack of
``FLOAT_SLACK``: equalities accept ``|residual| <= FLOAT_SLACK`` and strict
inequalities require a margin larger than it.

Exponents are passed as Lebesgue exponents (``q``, ``p``); ``math.inf`` is
accepted and maps to the reciprocal ``0``.  Points of the ``(1/q, 1/p)``
plane are stored as reciprocals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Union

Number = Union[int, float, Fraction]

FLOAT_SLACK = 1e-12


class ExponentError(ValueError):
    """Raised when inputs violate a precondition (range or finiteness)."""


def as_number(x) -> Number:
    """Normalize user input: rationals stay exact, floats stay floats."""
    if isinstance(x, bool):
        raise ExponentError("booleans are not exponents")
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("inf", "infinity", "oo"):
            return math.inf
        try:
            return Fraction(s)
        except ValueError as exc:
            raise ExponentError(f"cannot parse {x!r} as a number") from exc
    xf = float(x)
    if math.isnan(xf):
        raise ExponentError("NaN is not a valid input")
    return xf


def reciprocal(x) -> Number:
    """``1/x`` with ``1/inf = 0``; exact for rational input."""
    x = as_number(x)
    if x == math.inf:
        return Fraction(0)
    if x <= 0:
        raise ExponentError(f"exponents must be positive, got {x}")
    if isinstance(x, Fraction):
        return 1 / x
    return 1.0 / x


def _exact(*xs) -> bool:
    return all(isinstance(x, Fraction) for x in xs)


def _eq(a, b) -> bool:
    if _exact(a, b):
        return a == b
    return abs(float(a) - float(b)) <= FLOAT_SLACK


def _lt(a, b) -> bool:
    if _exact(a, b):
        return a < b
    return float(b) - float(a) > FLOAT_SLACK


def _le(a, b) -> bool:
    return _lt(a, b) or _eq(a, b)


@dataclass(frozen=True)
class ProblemParams:
    """Dimension ``n``, dispersion order ``alpha`` and regularity ``gamma``.

    ``alpha = 2`` is accepted for cross-checks against the classical
    Schrödinger flow; the well-posedness conditions reject it.
    """

    n: int
    alpha: Number
    gamma: Number = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_number(self.alpha))
        object.__setattr__(self, "gamma", as_number(self.gamma))
        if int(self.n) != self.n or self.n < 2:
            raise ExponentError(f"dimension must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if not math.isfinite(float(self.alpha)) or not math.isfinite(float(self.gamma)):
            raise ExponentError("alpha and gamma must be finite")
        if not (1 < self.alpha <= 2):
            raise ExponentError(f"alpha must lie in (1, 2], got {self.alpha}")

    @property
    def nu(self) -> float:
        """Bessel order ``(n - 2)/2`` of the radial reduction."""
        return (self.n - 2) / 2

    @property
    def exact(self) -> bool:
        return _exact(self.alpha, self.gamma)

    @property
    def in_strichartz_range(self) -> bool:
        """``2n/(2n-1) <= alpha < 2``."""
        lower = Fraction(2 * self.n, 2 * self.n - 1)
        return _le(lower, self.alpha) and _lt(self.alpha, 2)

    @property
    def gamma_floor(self) -> Number:
        """Left end ``-(alpha-1) n / (2(n+1))`` of the admissible regularity range."""
        return -(self.alpha - 1) * self.n / (2 * (self.n + 1))

    def with_gamma(self, gamma) -> "ProblemParams":
        return ProblemParams(self.n, self.alpha, gamma)


@dataclass(frozen=True)
class ExponentPoint:
    """A point ``(1/q, 1/p)`` of the unit square."""

    inv_q: Number
    inv_p: Number

    def __post_init__(self):
        for name in ("inv_q", "inv_p"):
            v = as_number(getattr(self, name))
            if not math.isfinite(float(v)) or not (0 <= v <= 1):
                raise ExponentError(f"{name} must lie in [0, 1], got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def from_exponents(cls, q, p) -> "ExponentPoint":
        return cls(reciprocal(q), reciprocal(p))


@dataclass(frozen=True)
class ExponentTuple:
    """Left pair ``(q, p)`` and right pair ``(q~, p~)`` of an inhomogeneous estimate."""

    pair: ExponentPoint
    dual_pair: ExponentPoint

    @classmethod
    def from_exponents(cls, q, p, qd, pd) -> "ExponentTuple":
        return cls(ExponentPoint.from_exponents(q, p), ExponentPoint.from_exponents(qd, pd))

    def swapped(self) -> "ExponentTuple":
        return ExponentTuple(self.dual_pair, self.pair)


def scaling_residual(params: ProblemParams, t: ExponentTuple) -> Number:
    """``alpha (1/q + 1/q~) - n (1 - 1/p - 1/p~)``."""
    a, b = t.pair, t.dual_pair
    return params.alpha * (a.inv_q + b.inv_q) - params.n * (1 - a.inv_p - b.inv_p)


def check_scaling_pair(params: ProblemParams, t: ExponentTuple) -> bool:
    return _eq(scaling_residual(params, t), 0)


def check_necessary_pair(params: ProblemParams, pt: ExponentPoint) -> bool:
    """Strict ``1/q + n/p < n/2``."""
    return _lt(pt.inv_q + params.n * pt.inv_p, Fraction(params.n, 2))


def homogeneous_endpoint(n: int) -> tuple[Fraction, Fraction]:
    """The excluded pair ``(q, p) = (2, (4n-2)/(2n-3))``."""
    return Fraction(2), Fraction(4 * n - 2, 2 * n - 3)


def check_homogeneous_admissible(params: ProblemParams, q, p) -> bool:
    """Scaling ``alpha/q + n/p = n/2 - gamma`` with ``2 <= q <= inf``, endpoint excluded."""
    iq, ip = reciprocal(q), reciprocal(p)
    if not _le(iq, Fraction(1, 2)):
        return False
    if not _eq(params.alpha * iq + params.n * ip, Fraction(params.n, 2) - params.gamma):
        return False
    eq, ep = homogeneous_endpoint(params.n)
    if _eq(iq, 1 / eq) and _eq(ip, 1 / ep):
        return False
    return True


def sharp_threshold(params: ProblemParams) -> Fraction:
    """Upper bound ``n / (2(n+1))`` on ``1/q`` and ``1/q~`` on the diagonal."""
    return Fraction(params.n, 2 * (params.n + 1))


def check_sharp_diagonal(params: ProblemParams, q, q_dual) -> bool:
    iq, iqd = reciprocal(q), reciprocal(q_dual)
    thr = sharp_threshold(params)
    return (_lt(iq, thr) and _lt(iqd, thr)
            and _eq(iq + iqd, params.n / (params.n + params.alpha)))


def corollary_bounds(params: ProblemParams, inv_p) -> tuple[Number, Number, Number]:
    """Bounds on ``1/q`` at fixed ``1/p``.

    Returns ``(lower, upper, slope_c4)`` where ``lower < 1/q < upper`` is the
    first frequency condition and the second reads
    ``1/p > slope_c4 * (1/q) + intercept_c4`` (see :func:`corollary_c4_line`).
    """
    n, a = params.n, params.alpha
    denom = (2 * a - 1) * n + a
    lower = -n * (n + 2 - a) / denom * (inv_p - Fraction(1, 2))
    upper = -n / ((a - 1) * n + a) * (inv_p - (n - a) / (2 * n)) + Fraction(1, 2)
    slope, _ = corollary_c4_line(params)
    return lower, upper, slope


def corollary_c4_line(params: ProblemParams) -> tuple[Number, Number]:
    """Slope and intercept of the line bounding ``1/p`` from below."""
    n, a = params.n, params.alpha
    denom = (2 * a - 1) * n + a
    slope = ((a - 1) * n ** 2 - a ** 2 * n - a ** 2) / (denom * n)
    intercept = a * (n + 2 - a) / (2 * denom)
    return slope, intercept


def corollary_conditions(params: ProblemParams, q, p) -> dict[str, bool]:
    iq, ip = reciprocal(q), reciprocal(p)
    lower, upper, _ = corollary_bounds(params, ip)
    slope, intercept = corollary_c4_line(params)
    return {
        "freq_lower": _lt(lower, iq),
        "freq_upper": _lt(iq, upper),
        "freq_p_line": _lt(slope * iq + intercept, ip),
    }


def check_corollary_region(params: ProblemParams, q, p) -> bool:
    return all(corollary_conditions(params, q, p).values())


@dataclass(frozen=True)
class WellposednessVerdict:
    """Outcome of the well-posedness exponent check; truthy iff all conditions hold."""

    conditions: dict
    failures: tuple

    def __bool__(self) -> bool:
        return not self.failures


WELLPOSEDNESS_CONDITIONS = {
    "solution_scaling": "alpha/q + n/p = n/2 - gamma",
    "potential_scaling": "alpha/r + n/w = alpha",
    "q_lower": "-gamma/(alpha-1) < 1/q",
    "q_upper": "1/q < gamma/((alpha-1) n) + 1/2",
    "r_lower": "1 - 1/q - (n(n+alpha)(alpha-1) + 2 gamma((2alpha-1)n+alpha)) / (2n(n+alpha)(alpha-1)) < 1/r",
    "r_upper": "1/r < 1 - 1/q + gamma(n+2-alpha)/((n+alpha)(alpha-1))",
}


def check_gamma_range(params: ProblemParams) -> None:
    """Raise unless ``2n/(2n-1) <= alpha < 2`` and ``gamma_floor < gamma <= 0``."""
    if not params.in_strichartz_range:
        raise ExponentError(
            f"alpha={params.alpha} outside [2n/(2n-1), 2) for n={params.n}")
    if not (_lt(params.gamma_floor, params.gamma) and _le(params.gamma, 0)):
        raise ExponentError(
            f"gamma={params.gamma} outside ({params.gamma_floor}, 0]")


def wellposedness_conditions(params: ProblemParams, q, p, r, w) -> dict[str, bool]:
    n, a, g = params.n, params.alpha, params.gamma
    iq, ip, ir, iw = (reciprocal(x) for x in (q, p, r, w))
    big = n * (n + a) * (a - 1) + 2 * g * ((2 * a - 1) * n + a)
    return {
        "solution_scaling": _eq(a * iq + n * ip, Fraction(n, 2) - g),
        "potential_scaling": _eq(a * ir + n * iw, a),
        "q_lower": _lt(-g / (a - 1), iq),
        "q_upper": _lt(iq, g / ((a - 1) * n) + Fraction(1, 2)),
        "r_lower": _lt(1 - iq - big / (2 * n * (n + a) * (a - 1)), ir),
        "r_upper": _lt(ir, 1 - iq + g * (n + 2 - a) / ((n + a) * (a - 1))),
    }


def check_wellposedness_exponents(params: ProblemParams, q, p, r, w) -> WellposednessVerdict:
    """Exponent conditions for the potential problem; raises on the gamma/alpha precondition."""
    check_gamma_range(params)
    conds = wellposedness_conditions(params, q, p, r, w)
    failures = tuple(k for k, ok in conds.items() if not ok)
    return WellposednessVerdict(conds, failures)


def dual_exponents(params: ProblemParams, q, r) -> tuple[Number, Number]:
    """Reciprocals ``(1/q~, 1/p~)`` paired with ``(q, p)`` through Hölder in time.

    ``1/q~' = 1/r + 1/q`` and ``alpha/q~ + n/p~ = n/2 + gamma``.
    """
    iq, ir = reciprocal(q), reciprocal(r)
    iqd = 1 - iq - ir
    ipd = (Fraction(params.n, 2) + params.gamma - params.alpha * iqd) / params.n
    return iqd, ipd


def dual_window_conditions(params: ProblemParams, inv_qd) -> dict[str, bool]:
    """Range of ``1/q~`` on the dual line (the counterpart of the ``r`` bounds)."""
    n, a, g = params.n, params.alpha, params.gamma
    lower = g * (n + 2 - a) / ((n + a) * (a - 1))
    upper = (n * (n + a) * (a - 1) + 2 * g * ((2 * a - 1) * n + a)) / (2 * n * (n + a) * (a - 1))
    return {"qd_lower": _lt(lower, inv_qd), "qd_upper": _lt(inv_qd, upper)}


def region_boundary_samples(params: ProblemParams, num: int = 101) -> list[dict]:
    """Boundary lines of the corollary region sampled on ``1/p`` in ``[0, 1]``.

    Each row gives the two ``1/q`` bounds and the ``1/q`` value at which the
    ``1/p``-line condition becomes an equality; plot-ready, no membership logic.
    """
    slope, intercept = corollary_c4_line(params)
    rows = []
    for i in range(num):
        ip = Fraction(i, num - 1)
        lower, upper, _ = corollary_bounds(params, ip)
        c4 = (ip - intercept) / slope if slope != 0 else math.nan
        diag = Fraction(params.n, 2) - params.n * ip
        rows.append({
            "inv_p": float(ip),
            "freq_lower": float(lower),
            "freq_upper": float(upper),
            "p_line_inv_q": float(c4),
            "necessary_inv_q": float(diag),
        })
    return rows
