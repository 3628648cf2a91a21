"""Interpolation nodes, Newton basis matrices, and quadrature rules.

Newton interpolation is only as good as the node ordering: the triangular
basis matrix L[i][j] = prod_{k<j} (x_i - x_k) picks up the running products
of node differences, so nodes are Leja-ordered to keep those products (and
with them the conditioning of the triangular solves) under control.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mindex import MultiIndexSet

__all__ = [
    "NodeSystem",
    "NewtonVandermonde",
    "chebyshev_lobatto",
    "leja_order",
    "leja_points",
    "make_node_system",
    "newton_vandermonde",
    "triangular_solve",
    "build_grid",
    "gauss_legendre",
]

NODE_FAMILIES = ("chebyshev_lobatto", "leja")


def chebyshev_lobatto(n: int) -> np.ndarray:
    """Chebyshev-Lobatto points cos(k*pi/n), k = 0..n, descending from 1.

    Evaluated in the sine form sin((n-2k)*pi/(2n)) so that symmetric pairs
    and the midpoint zero come out exactly.  n = 0 returns the single point
    {0}.
    """
    if n < 0:
        raise ValueError(f"degree must be >= 0, got {n}")
    if n == 0:
        return np.zeros(1)
    k = np.arange(n + 1)
    return np.sin((n - 2 * k) * (math.pi / (2 * n)))


def leja_order(points: np.ndarray) -> np.ndarray:
    """Greedy Leja reordering of a set of distinct points.

    The first point maximizes |x| (ties broken toward the positive value);
    each following point maximizes the product of distances to all points
    already chosen, ties broken toward the larger value, then the smaller
    original index.

    Examples
    --------
    >>> leja_order(np.array([1.0, 0.0, -1.0]))
    array([ 1., -1.,  0.])
    """
    pts = np.asarray(points, dtype=np.float64).copy()
    count = pts.shape[0]
    if count == 0:
        raise ValueError("cannot Leja-order an empty point set")
    order = np.empty(count, dtype=np.int64)
    score = np.abs(pts)  # step 0 criterion; later steps use distance products
    chosen = np.zeros(count, dtype=bool)
    log_prod = np.zeros(count)
    for step in range(count):
        best = -1
        for i in range(count):
            if chosen[i]:
                continue
            if best < 0 or score[i] > score[best]:
                best = i
            elif score[i] == score[best] and pts[i] > pts[best]:
                best = i
        order[step] = best
        chosen[best] = True
        with np.errstate(divide="ignore"):
            log_prod += np.log(np.abs(pts - pts[best]))
        score = log_prod.copy()
        score[chosen] = -np.inf
    return pts[order]


def leja_points(n: int, mesh_size: int = 10000) -> np.ndarray:
    """n+1 Leja points greedily extracted from a Chebyshev candidate mesh."""
    if n < 0:
        raise ValueError(f"degree must be >= 0, got {n}")
    mesh = chebyshev_lobatto(mesh_size - 1)
    out = np.empty(n + 1)
    log_prod = np.zeros(mesh_size)
    # first point: max |x|, positive on ties; the mesh is descending from 1
    out[0] = 1.0
    taken = mesh == 1.0
    for step in range(1, n + 1):
        with np.errstate(divide="ignore"):
            log_prod += np.log(np.abs(mesh - out[step - 1]))
        score = np.where(taken, -np.inf, log_prod)
        best = int(np.argmax(score))
        # ties toward the larger value: argmax returns the first (largest,
        # mesh is descending)
        out[step] = mesh[best]
        taken[best] = True
    return out


@dataclass(eq=False)
class NodeSystem:
    """An ordered set of pairwise distinct interpolation nodes."""

    points: np.ndarray
    family: str = "custom"
    _vandermonde: "NewtonVandermonde | None" = field(default=None, repr=False)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def vandermonde(self) -> "NewtonVandermonde":
        if self._vandermonde is None:
            self._vandermonde = newton_vandermonde(self)
        return self._vandermonde


def make_node_system(n: int, family: str = "chebyshev_lobatto") -> NodeSystem:
    """Leja-ordered node system with n+1 points of the requested family."""
    if family == "chebyshev_lobatto":
        return NodeSystem(points=leja_order(chebyshev_lobatto(n)), family=family)
    if family == "leja":
        return NodeSystem(points=leja_points(n), family=family)
    raise ValueError(f"unknown node family {family!r}, expected one of {NODE_FAMILIES}")


@dataclass(eq=False)
class NewtonVandermonde:
    """Lower-triangular Newton basis matrix over a node system.

    matrix[i][j] = prod_{k<j} (x_i - x_k); column 0 is all ones and the
    diagonal holds the nonzero running products, so forward substitution is
    always well posed for distinct nodes.
    """

    matrix: np.ndarray
    nodes: NodeSystem


def newton_vandermonde(nodes: NodeSystem) -> NewtonVandermonde:
    pts = np.asarray(nodes.points, dtype=np.float64)
    count = pts.shape[0]
    if np.unique(pts).shape[0] != count:
        raise ValueError("nodes must be pairwise distinct")
    L = np.ones((count, count))
    for j in range(1, count):
        L[:, j] = L[:, j - 1] * (pts - pts[j - 1])
    return NewtonVandermonde(matrix=np.tril(L), nodes=nodes)


def triangular_solve(L: NewtonVandermonde, rhs: np.ndarray,
                     truncate_to: int | None = None) -> np.ndarray:
    """Forward substitution on the leading block of the Newton matrix.

    Solves L[:t, :t] c = rhs for t = truncate_to (default: len(rhs)), the
    univariate divided-difference computation in matrix form.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    t = rhs.shape[0] if truncate_to is None else truncate_to
    if t > L.matrix.shape[0]:
        raise ValueError(f"cannot truncate to {t} rows of a {L.matrix.shape[0]}-node matrix")
    mat = L.matrix
    c = rhs[:t].copy()
    for i in range(1, t):
        c[i] = (c[i] - mat[i, :i] @ c[:i]) / mat[i, i]
    return c


def build_grid(A: MultiIndexSet, nodes: NodeSystem) -> np.ndarray:
    """Interpolation grid: row for alpha holds (x_{alpha_1}, ..., x_{alpha_m})."""
    if int(A.indices.max(initial=0)) >= nodes.count:
        raise ValueError(f"index set needs degree {int(A.indices.max())} but only "
                         f"{nodes.count} nodes are available")
    return nodes.points[A.indices.astype(np.int64)]


# ---------------------------------------------------------------------------
# Gauss-Legendre quadrature
# ---------------------------------------------------------------------------

def _legendre_and_derivative(k: int, x: np.ndarray):
    """P_k(x) and P_k'(x) by the three-term recurrence."""
    p_prev = np.ones_like(x)
    if k == 0:
        return p_prev, np.zeros_like(x)
    p_cur = x.copy()
    for j in range(1, k):
        p_next = ((2 * j + 1) * x * p_cur - j * p_prev) / (j + 1)
        p_prev, p_cur = p_cur, p_next
    dp = k * (x * p_cur - p_prev) / (x * x - 1.0)
    return p_cur, dp


def gauss_legendre(count: int):
    """Nodes and weights of the count-point Gauss-Legendre rule on [-1, 1].

    Newton iteration on P_count from the Chebyshev initial guesses; exact
    for polynomials of degree <= 2*count - 1, weights sum to 2.

    Returns
    -------
    (nodes, weights) : pair of ndarrays, nodes ascending.
    """
    if count < 1:
        raise ValueError(f"need at least one quadrature point, got {count}")
    if count == 1:
        return np.zeros(1), np.full(1, 2.0)
    i = np.arange(count)
    x = np.cos(math.pi * (4 * i + 3) / (4 * count + 2))
    for _ in range(100):
        p, dp = _legendre_and_derivative(count, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    _, dp = _legendre_and_derivative(count, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return x[order], w[order]
