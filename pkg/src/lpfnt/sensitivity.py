"""Active-subspace sensitivity analysis of polynomial surrogates.

The gradient covariance C[i][j] = E[d_i f * d_j f] over the uniform cube is
computed exactly from the surrogate: each partial derivative stays inside
the polynomial space, so after a change to the orthonormal tensor Legendre
basis the expectation of a product collapses to a dot product of coefficient
vectors.  Eigenvalues/eigenvectors of C give the active directions; the
activity score of variable i aggregates the leading k eigenpairs,

    theta_i = sum_{j<=k} lambda_j * (w_j)_i^2,

and with k = m it reduces to diag(C).  A finite-difference Monte Carlo
estimate of the same matrix serves as the statistical cross-check.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .mindex import PNorm, build_index_set
from .models import BenchmarkModel
from .nodes import build_grid, gauss_legendre, make_node_system
from .transform import (NewtonInterpolant, differentiate, evaluate_batch,
                        fnt_forward, plan, to_orthonormal)

__all__ = [
    "EigenDecomposition",
    "ActivityScores",
    "MCReference",
    "SensitivityReport",
    "grad_cov",
    "grad_cov_quadrature",
    "gauss_legendre",
    "eigh",
    "activity_scores",
    "choose_k",
    "mc_reference",
    "activity_pipeline",
]

QUADRATURE_DIM_LIMIT = 4
FD_RELATIVE_STEP = 1e-6
FD_ABSOLUTE_FLOOR = 1e-9


# ---------------------------------------------------------------------------
# gradient covariance
# ---------------------------------------------------------------------------

def grad_cov(interp: NewtonInterpolant) -> np.ndarray:
    """Exact gradient covariance of the interpolant over the uniform cube.

    Row i holds the orthonormal-basis coefficients of d_i f; orthonormality
    turns E[d_i f * d_j f] into the Gram matrix of those rows.
    """
    m = interp.A.m
    rows = np.empty((m, len(interp.A)))
    for axis in range(m):
        rows[axis] = to_orthonormal(differentiate(interp, axis))
    C = rows @ rows.T
    return 0.5 * (C + C.T)


def grad_cov_quadrature(interp: NewtonInterpolant, points_per_dim: int | None = None) -> np.ndarray:
    """Same matrix by tensor-product Gauss-Legendre quadrature.

    Integrates grad f grad f^T against the uniform probability measure on
    the cube; exact once points_per_dim exceeds the polynomial degree.
    Guarded to m <= 4 (the grid is exponential in m): the point of this
    routine is validating grad_cov, not production use.
    """
    m = interp.A.m
    if m > QUADRATURE_DIM_LIMIT:
        raise ValueError(f"quadrature validation limited to m <= {QUADRATURE_DIM_LIMIT}, got {m}")
    if points_per_dim is None:
        points_per_dim = interp.A.n + 1
    x, w = gauss_legendre(points_per_dim)
    grids = np.meshgrid(*([x] * m), indexing="ij")
    points = np.stack([g.reshape(-1) for g in grids], axis=-1)
    weights = np.ones(points.shape[0])
    for d in range(m):
        weights *= np.tile(np.repeat(w, points_per_dim ** (m - 1 - d)),
                           points_per_dim ** d)
    weights /= 2.0 ** m
    grads = np.empty((points.shape[0], m))
    for axis in range(m):
        grads[:, axis] = evaluate_batch(differentiate(interp, axis), points)
    return (grads * weights[:, None]).T @ grads


# ---------------------------------------------------------------------------
# symmetric eigendecomposition (cyclic Jacobi)
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class EigenDecomposition:
    """Eigenvalues descending, eigenvectors as matching columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def eigh(C: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100) -> EigenDecomposition:
    """Cyclic-by-rows Jacobi iteration for a symmetric matrix.

    Sweeps rotate every off-diagonal pair until the off-diagonal Frobenius
    mass falls below tol * ||C||_F.  Raises if the input is not symmetric
    or the iteration fails to settle within max_sweeps.
    """
    A = np.asarray(C, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"need a square matrix, got shape {A.shape}")
    scale = np.linalg.norm(A)
    if not np.allclose(A, A.T, atol=1e-12 * max(scale, 1.0)):
        raise ValueError("matrix is not symmetric")
    size = A.shape[0]
    A = 0.5 * (A + A.T)
    V = np.eye(size)
    if scale == 0.0:
        return EigenDecomposition(np.zeros(size), V)
    off_mask = ~np.eye(size, dtype=bool)
    for _ in range(max_sweeps):
        # summing the off-diagonal entries directly avoids the cancellation
        # floor of ||A||_F^2 - ||diag||^2, which sits far above tol*scale
        off = math.sqrt(np.sum(A[off_mask] ** 2))
        if off <= tol * scale:
            break
        for i in range(size - 1):
            for j in range(i + 1, size):
                aij = A[i, j]
                if abs(aij) <= 1e-20 * scale:
                    continue
                theta = (A[j, j] - A[i, i]) / (2.0 * aij)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot_i, rot_j = A[:, i].copy(), A[:, j].copy()
                A[:, i] = c * rot_i - s * rot_j
                A[:, j] = s * rot_i + c * rot_j
                rot_i, rot_j = A[i, :].copy(), A[j, :].copy()
                A[i, :] = c * rot_i - s * rot_j
                A[j, :] = s * rot_i + c * rot_j
                vi, vj = V[:, i].copy(), V[:, j].copy()
                V[:, i] = c * vi - s * vj
                V[:, j] = s * vi + c * vj
    else:
        raise RuntimeError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    values = np.diag(A).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = V[:, order]
    # deterministic sign: largest-magnitude component positive
    for col in range(size):
        lead = np.argmax(np.abs(vectors[:, col]))
        if vectors[lead, col] < 0.0:
            vectors[:, col] = -vectors[:, col]
    return EigenDecomposition(values, vectors)


# ---------------------------------------------------------------------------
# activity scores
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class ActivityScores:
    """Scores theta plus the subspace size and the descending ranking."""

    k: int
    theta: np.ndarray
    ranking: np.ndarray


def activity_scores(eig: EigenDecomposition, k: int) -> ActivityScores:
    """theta_i = sum_{j<k} lambda_j w_{ij}^2 over the leading k eigenpairs.

    With k = m this is exactly the diagonal of the covariance matrix.
    Ranking ties break toward the lower variable index.
    """
    m = eig.eigenvalues.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"k must be in 1..{m}, got {k}")
    theta = (eig.eigenvectors[:, :k] ** 2) @ eig.eigenvalues[:k]
    ranking = np.argsort(-theta, kind="stable")
    return ActivityScores(k=k, theta=theta, ranking=ranking)


def choose_k(eigenvalues: np.ndarray, strategy: str = "gap") -> int:
    """Subspace size: 'gap' cuts at the largest eigenvalue ratio, 'all'
    keeps every direction, 'fixed:K' forces K.  A flat spectrum has no gap
    and keeps everything."""
    values = np.asarray(eigenvalues, dtype=np.float64)
    m = values.shape[0]
    if strategy == "all":
        return m
    if strategy.startswith("fixed:"):
        k = int(strategy.split(":", 1)[1])
        if not 1 <= k <= m:
            raise ValueError(f"fixed k must be in 1..{m}, got {k}")
        return k
    if strategy != "gap":
        raise ValueError(f"unknown strategy {strategy!r}, expected gap, all, or fixed:K")
    if m == 1:
        return 1
    floor = max(np.max(np.abs(values)), 1.0) * 1e-300
    ratios = np.maximum(values[:-1], floor) / np.maximum(values[1:], floor)
    if np.max(ratios) <= np.min(ratios) * (1.0 + 1e-12):
        return m  # flat spectrum, no gap to cut at
    return int(np.argmax(ratios)) + 1


# ---------------------------------------------------------------------------
# Monte Carlo reference
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class MCReference:
    """Replicated finite-difference Monte Carlo activity scores."""

    mean: np.ndarray
    std: np.ndarray
    samples: int
    replications: int

    @property
    def stderr(self) -> np.ndarray:
        return self.std / math.sqrt(self.replications)


def _fd_activity(model: BenchmarkModel, rng: np.random.Generator, samples: int) -> np.ndarray:
    m = model.m
    u = rng.uniform(-1.0, 1.0, size=(samples, m))
    base = model.evaluate_reference(u)
    grads = np.empty((samples, m))
    for axis in range(m):
        h = np.maximum(FD_RELATIVE_STEP * np.abs(u[:, axis]), FD_ABSOLUTE_FLOOR)
        shifted = u.copy()
        shifted[:, axis] += h
        grads[:, axis] = (model.evaluate_reference(shifted) - base) / h
    C = grads.T @ grads / samples
    eig = eigh(0.5 * (C + C.T))
    return activity_scores(eig, k=m).theta


def mc_reference(model: BenchmarkModel, samples: int, replications: int,
                 seed: int = 0, threads: int = 1) -> MCReference:
    """Monte Carlo activity scores from forward finite differences.

    Uniform sampling on the reference cube, relative step 1e-6 with an
    absolute floor of 1e-9, k = m scores per replication.  Each replication
    draws from its own seeded stream, so the result is reproducible and
    independent of threading.
    """
    if samples < 2 or replications < 1:
        raise ValueError("need samples >= 2 and replications >= 1")

    def one(rep: int) -> np.ndarray:
        return _fd_activity(model, np.random.default_rng([seed, rep]), samples)

    if threads > 1 and replications > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            thetas = np.array(list(pool.map(one, range(replications))))
    else:
        thetas = np.array([one(rep) for rep in range(replications)])
    std = (thetas.std(axis=0, ddof=1) if replications > 1
           else np.zeros(model.m))
    return MCReference(mean=thetas.mean(axis=0), std=std,
                       samples=samples, replications=replications)


# ---------------------------------------------------------------------------
# end-to-end pipeline and report
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SensitivityReport:
    """Everything the activity run produced, JSON-serializable."""

    model: str
    m: int
    n: int
    p: PNorm
    cardinality: int
    k: int
    theta: np.ndarray
    eigenvalues: np.ndarray
    ranking: np.ndarray
    mc: MCReference | None = None
    theta_full: np.ndarray | None = field(default=None)

    def to_dict(self) -> dict:
        p = float(self.p)
        doc = {
            "model": self.model,
            "m": self.m,
            "n": self.n,
            "p": "inf" if math.isinf(p) else p,
            "cardinality": self.cardinality,
            "k": self.k,
            "theta": [float(v) for v in self.theta],
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "ranking": [int(v) + 1 for v in self.ranking],  # 1-based variables
            "mc": None,
        }
        if self.mc is not None:
            doc["mc"] = {
                "mean": [float(v) for v in self.mc.mean],
                "std": [float(v) for v in self.mc.std],
                "N": self.mc.samples,
                "R": self.mc.replications,
            }
        if self.theta_full is not None:
            doc["theta_full"] = [float(v) for v in self.theta_full]
        return doc

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def activity_pipeline(model: BenchmarkModel, n: int, p=2.0,
                      node_family: str = "chebyshev_lobatto",
                      k_strategy: str = "gap",
                      mc: tuple | None = None,
                      seed: int = 0, threads: int = 1) -> SensitivityReport:
    """Surrogate-based activity scores for a benchmark model.

    Interpolates the model on the lp-degree grid over the reference cube,
    computes the exact gradient covariance of the surrogate, and aggregates
    eigenpairs into activity scores.  ``mc=(N, R)`` additionally runs the
    finite-difference Monte Carlo reference.
    """
    A = build_index_set(model.m, n, p)
    nodes = make_node_system(n, node_family)
    level_plan = plan(A)
    grid = build_grid(A, nodes)
    samples = model.evaluate_reference(grid)
    interp = fnt_forward(samples, level_plan, nodes.vandermonde(), threads=threads)
    C = grad_cov(interp)
    eig = eigh(C)
    k = choose_k(eig.eigenvalues, k_strategy)
    scores = activity_scores(eig, k)
    full = activity_scores(eig, model.m).theta if k != model.m else None
    reference = None
    if mc is not None:
        mc_samples, mc_reps = mc
        reference = mc_reference(model, mc_samples, mc_reps, seed=seed, threads=threads)
    return SensitivityReport(
        model=model.name, m=model.m, n=n, p=PNorm.of(p), cardinality=len(A),
        k=k, theta=scores.theta, eigenvalues=eig.eigenvalues,
        ranking=scores.ranking, mc=reference, theta_full=full,
    )
