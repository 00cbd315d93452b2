"""Lebesgue, mixed space-time and homogeneous Sobolev norms of radial fields.

Radial norms come in three flavours (:class:`Weight`): the true ``L^p(R^n)``
norm (``|S^{n-1}| r^{n-1} dr``), the weighted space ``L^p(r^{n-1} dr)``
written ``𝔏^p`` in the kernel estimates, and plain ``L^p(dr)``.  Exponents
may be ``math.inf``; the sup norm is the maximum over quadrature nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np
from scipy.special import roots_jacobi

from .exponents import as_number, reciprocal
from .propagator import SpaceTimeField, apply_multiplier
from .quadrature import gauss_legendre, radial_grid
from .radial_transform import RadialProfile, forward_values, sphere_area


class Weight(str, Enum):
    EUCLIDEAN = "euclidean"
    RADIAL = "radial"
    PLAIN = "plain"


class DivergenceError(ArithmeticError):
    """An integral that should be finite failed its tail test."""


@dataclass(frozen=True)
class NormSpec:
    """``L^q_t L^p_x`` with a spatial weight and an optional Sobolev index."""

    time_exponent: float = 2.0
    space_exponent: float = 2.0
    weight: Weight = Weight.EUCLIDEAN
    sobolev_gamma: float | None = None

    def __post_init__(self):
        for e in (self.time_exponent, self.space_exponent):
            if not (1 <= float(e) <= math.inf):
                raise ValueError(f"exponents must lie in [1, inf], got {e}")
        object.__setattr__(self, "weight", Weight(self.weight))


def space_measure(f: RadialProfile, weight: Weight = Weight.EUCLIDEAN) -> np.ndarray:
    w = f.grid.weights
    if weight == Weight.PLAIN:
        return w
    m = w * f.grid.nodes ** (f.dim - 1)
    return m * sphere_area(f.dim) if weight == Weight.EUCLIDEAN else m


def _lp(values: np.ndarray, measure: np.ndarray, p: float) -> np.ndarray:
    """``L^p`` norms along the last axis."""
    mag = np.abs(values)
    if p == math.inf:
        return mag.max(axis=-1)
    return np.sum(measure * mag ** p, axis=-1) ** (1.0 / p)


def lp_norm(f: RadialProfile, p: float, weight: Weight = Weight.EUCLIDEAN) -> float:
    p = float(p)
    return float(_lp(f.values, space_measure(f, weight), p))


def space_norms(u: SpaceTimeField, p: float, weight: Weight = Weight.EUCLIDEAN) -> np.ndarray:
    """``||u(t)||_{L^p}`` for every frame."""
    return _lp(u.values, space_measure(u.frame(0), weight), float(p))


def time_norm(values: np.ndarray, weights: np.ndarray | None, q: float) -> float:
    values = np.abs(np.asarray(values, dtype=float))
    if q == math.inf:
        return float(values.max()) if values.size else 0.0
    if weights is None:
        raise ValueError("a finite time exponent needs time quadrature weights")
    return float(np.sum(weights * values ** q) ** (1.0 / q))


def tail_fraction(values: np.ndarray, weights: np.ndarray, q: float, frac: float = 0.1) -> float:
    """Share of ``int |g|^q dt`` carried by the last ``frac`` of the nodes."""
    if q == math.inf or values.size == 0:
        return 0.0
    contrib = weights * np.abs(values) ** q
    total = contrib.sum()
    if total == 0:
        return 0.0
    k = max(1, int(round(frac * values.size)))
    return float(contrib[-k:].sum() / total)


def mixed_spacetime_norm(u: SpaceTimeField, spec: NormSpec, *, tail_tol: float | None = None) -> float:
    """``|| ||u(t)||_{L^p_x} ||_{L^q_t}`` over the span of ``u``.

    With ``tail_tol`` set, raises :class:`DivergenceError` when the last
    tenth of the time nodes carries more than ``tail_tol`` of the outer
    integral (the truncated time integral is then not trustworthy).
    """
    inner = space_norms(u, spec.space_exponent, spec.weight)
    q = float(spec.time_exponent)
    if tail_tol is not None and u.time_weights is not None:
        tf = tail_fraction(inner, u.time_weights, q)
        if tf > tail_tol:
            raise DivergenceError(f"outer L^{q:g} integral not settled: last tenth carries {tf:.2e}")
    return time_norm(inner, u.time_weights, q)


# ---------------------------------------------------------------------------
# Sobolev


def _sobolev_rule(rho_max: float, extent: float, gamma: float, n: int):
    """Nodes and weights for ``int_0^rho_max g(rho) rho**(2 gamma + n - 1) d rho``.

    The first dyadic panel carries the power weight exactly (Gauss-Jacobi),
    so negative ``gamma`` is integrated without loss of order; the other
    panels reuse the radial grid with the weight multiplied in.
    """
    beta = 2 * gamma + n - 1
    grid = radial_grid(rho_max, extent)
    inner = 2.0 ** -3
    keep = grid.nodes > inner
    x_out, w_out = grid.nodes[keep], grid.weights[keep] * grid.nodes[keep] ** beta
    order = int(np.count_nonzero(~keep)) or 8
    xj, wj = roots_jacobi(order, 0.0, beta)
    # (1 + x)^beta on [-1, 1] maps to (2 rho / inner)^beta
    x_in = 0.5 * inner * (xj + 1.0)
    w_in = wj * (0.5 * inner) ** (beta + 1)
    return np.concatenate([x_in, x_out]), np.concatenate([w_in, w_out])


def sobolev_norm(f: RadialProfile, gamma: float) -> float:
    """``||f||_{H^gamma}`` (homogeneous) ``= ||rho**gamma f^||_{L^2}`` with ``(2 pi)^-n d xi``."""
    gamma = float(gamma)
    n = f.dim
    if not gamma > -n / 2:
        raise DivergenceError(f"low-frequency divergence: gamma={gamma} <= -n/2={-n / 2}")
    rho, w = _sobolev_rule(f.grid.bandwidth, 2.0 * f.grid.extent, gamma, n)
    fh = forward_values(n, f.grid, f.values, rho)
    val = sphere_area(n) / (2 * math.pi) ** n * np.sum(w * np.abs(fh) ** 2)
    return float(math.sqrt(val))


def sobolev_norms(u: SpaceTimeField, gamma: float) -> np.ndarray:
    """``||u(t)||_{H^gamma}`` for every frame."""
    gamma = float(gamma)
    n = u.dim
    if not gamma > -n / 2:
        raise DivergenceError(f"low-frequency divergence: gamma={gamma} <= -n/2")
    rho, w = _sobolev_rule(u.grid.bandwidth, 2.0 * u.grid.extent, gamma, n)
    fh = forward_values(n, u.grid, u.values, rho)
    return np.sqrt(sphere_area(n) / (2 * math.pi) ** n * np.sum(w * np.abs(fh) ** 2, axis=-1))


def fractional_derivative(g: RadialProfile, beta: float) -> RadialProfile:
    """``D**beta g`` with symbol ``rho**beta``."""
    return apply_multiplier(g, lambda rho: rho ** float(beta))


def sobolev_embedding_check(g: RadialProfile, a, b, beta) -> float:
    """``||g||_{L^b} / ||D^beta g||_{L^a}`` for exponents on the embedding line.

    Requires ``1/a - 1/b = beta/n``, ``0 <= beta < n/a`` and ``1 < a < inf``;
    the relation is checked exactly for rational input.
    """
    n = g.dim
    ia, ib, bt = reciprocal(a), reciprocal(b), as_number(beta)
    exact = all(isinstance(x, Fraction) for x in (ia, ib, bt))
    resid = ia - ib - bt / n if exact else float(ia) - float(ib) - float(bt) / n
    if (resid != 0) if exact else abs(resid) > 1e-12:
        raise ValueError(f"1/a - 1/b - beta/n = {resid} (must vanish)")
    if not (0 <= bt < n * ia) or not (0 < ia < 1):
        raise ValueError("need 0 <= beta < n/a and 1 < a < inf")
    d = g if bt == 0 else fractional_derivative(g, float(bt))
    return lp_norm(g, 1.0 / float(ib) if ib else math.inf) / lp_norm(d, 1.0 / float(ia))
