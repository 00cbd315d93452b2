"""Composite Gauss-Legendre rules used by every integral in the package.

Radial grids are built from dyadic shells, each split into panels whose
Gauss-Legendre order follows the local oscillation ``width * bandwidth``.
Time meshes carry a spectral cumulative-integration matrix so that
retarded integrals over ``[0, t]`` can be evaluated at every node at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

MAX_PANEL_ORDER = 48


@lru_cache(maxsize=None)
def _gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a: float, b: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the ``order``-point rule on ``[a, b]``."""
    x, w = _gauss_legendre(int(order))
    h = 0.5 * (b - a)
    return a + h * (x + 1.0), h * w


def panel_order(width: float, bandwidth: float, *, min_order: int = 8, extra: int = 10) -> int:
    """Points needed to integrate ``exp(i*bandwidth*x)``-type content over one panel."""
    return max(min_order, int(np.ceil(0.55 * width * bandwidth)) + extra)


def composite_rule(edges, bandwidth: float, *, min_order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule over consecutive intervals given by ``edges``.

    Intervals whose required order exceeds ``MAX_PANEL_ORDER`` are split
    into equal sub-panels.
    """
    edges = np.asarray(edges, dtype=float)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        order = panel_order(b - a, bandwidth, min_order=min_order)
        pieces = int(np.ceil(order / MAX_PANEL_ORDER))
        sub = np.linspace(a, b, pieces + 1)
        for c, d in zip(sub[:-1], sub[1:]):
            x, w = gauss_legendre(c, d, panel_order(d - c, bandwidth, min_order=min_order))
            xs.append(x)
            ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def dyadic_edges(r_max: float, inner: float = 2.0 ** -3) -> np.ndarray:
    """``[0, inner, 2*inner, 4*inner, ..., r_max]``."""
    if r_max <= inner:
        return np.array([0.0, r_max])
    edges = [0.0, inner]
    while edges[-1] * 2 < r_max * (1 - 1e-12):
        edges.append(edges[-1] * 2)
    edges.append(r_max)
    return np.array(edges)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Quadrature nodes on ``(0, extent]`` for integrals in ``dr``."""

    nodes: np.ndarray
    weights: np.ndarray
    extent: float
    bandwidth: float
    key: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.nodes.ndim != 1 or self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights must be 1-D arrays of equal length")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self) -> int:
        return self.nodes.size

    def scaled(self, factor: float) -> "RadialGrid":
        """Grid for the variable ``r / factor`` (nodes and weights divided)."""
        return RadialGrid(self.nodes / factor, self.weights / factor,
                          self.extent / factor, self.bandwidth * factor,
                          key=("scaled", self.key, float(factor)))


@lru_cache(maxsize=64)
def radial_grid(extent: float, bandwidth: float, inner: float = 2.0 ** -3,
                min_order: int = 8) -> RadialGrid:
    """Dyadic-shell composite Gauss-Legendre grid on ``[0, extent]``.

    ``bandwidth`` is the largest dual variable the grid must resolve, e.g.
    ``rho_max`` for a physical-space grid feeding a Bessel kernel ``J(r*rho)``.
    Panels are sized for twice that rate so that products of two waves of
    bandwidth ``rho_max`` (a transformed profile times the kernel) stay
    resolved.
    """
    x, w = composite_rule(dyadic_edges(extent, inner), 2.0 * bandwidth, min_order=min_order)
    return RadialGrid(x, w, float(extent), float(bandwidth),
                      key=("radial", float(extent), float(bandwidth), float(inner), min_order))


def interval_rule(a: float, b: float, bandwidth: float, *, min_order: int = 8):
    """Composite rule on ``[a, b]`` resolving oscillation up to ``bandwidth``."""
    return composite_rule([a, b], bandwidth, min_order=min_order)


def _lagrange_integration_matrix(x: np.ndarray) -> np.ndarray:
    """``M[i, j] = int_{-1}^{x_i} l_j(s) ds`` for Lagrange basis on nodes ``x``."""
    m = x.size
    vander = np.polynomial.legendre.legvander(x, m - 1)
    # integrate Legendre series P_k from -1 to x
    ints = np.empty((m, m))
    for k in range(m):
        c = np.zeros(m)
        c[k] = 1.0
        ic = np.polynomial.legendre.legint(c, lbnd=-1)
        ints[:, k] = np.polynomial.legendre.legval(x, ic)
    return ints @ np.linalg.inv(vander)


@dataclass(frozen=True, eq=False)
class TimeMesh:
    """Panels of Gauss-Legendre nodes on ``[t0, t1]``.

    ``cumulative`` maps samples ``g(t_j)`` to ``int_{t0}^{t_i} g`` at every node.
    """

    nodes: np.ndarray
    weights: np.ndarray
    cumulative: np.ndarray
    panel_edges: np.ndarray
    order: int

    @property
    def span(self) -> tuple[float, float]:
        return float(self.panel_edges[0]), float(self.panel_edges[-1])


def time_mesh(t0: float, t1: float, panels: int, order: int = 12) -> TimeMesh:
    x, w = _gauss_legendre(order)
    local = _lagrange_integration_matrix(np.asarray(x))
    edges = np.linspace(t0, t1, panels + 1)
    n = panels * order
    nodes = np.empty(n)
    weights = np.empty(n)
    cum = np.zeros((n, n))
    for p in range(panels):
        a, b = edges[p], edges[p + 1]
        h = 0.5 * (b - a)
        sl = slice(p * order, (p + 1) * order)
        nodes[sl] = a + h * (x + 1)
        weights[sl] = h * w
        # full earlier panels
        cum[sl, : p * order] = weights[: p * order][None, :]
        cum[sl, sl] = h * local
    return TimeMesh(nodes, weights, cum, edges, order)


def scaled_mesh(mesh: TimeMesh, factor: float) -> TimeMesh:
    """Mesh for the variable ``t / factor``."""
    return TimeMesh(mesh.nodes / factor, mesh.weights / factor, mesh.cumulative / factor,
                    mesh.panel_edges / factor, mesh.order)


def panels_for_phase(t0: float, t1: float, omega: float, order: int = 16,
                     phase_per_panel: float = 4.0) -> int:
    """Panel count keeping ``omega * width`` below ``phase_per_panel`` (order-16 default)."""
    width = abs(t1 - t0)
    per = phase_per_panel * order / 16.0
    return max(1, int(np.ceil(omega * width / per)))


def lagrange_matrix(x_nodes: np.ndarray, x_eval: np.ndarray) -> np.ndarray:
    """``L[i, j] = l_j(x_eval[i])`` for the Lagrange basis on ``x_nodes``."""
    x_nodes = np.asarray(x_nodes, dtype=float)
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    c, h = 0.5 * (x_nodes.max() + x_nodes.min()), 0.5 * np.ptp(x_nodes) or 1.0
    x_nodes, x_eval = (x_nodes - c) / h, (x_eval - c) / h
    diff = x_nodes[:, None] - x_nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / np.prod(diff, axis=1)
    d = x_eval[:, None] - x_nodes[None, :]
    exact = d == 0
    d[exact] = 1.0
    tmp = bary[None, :] / d
    L = tmp / tmp.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    L[rows] = exact[rows].astype(float)
    return L
