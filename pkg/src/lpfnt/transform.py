"""Fast Newton transform on downward-closed lp-degree index sets.

The multivariate Newton coefficients of samples on the grid solve a lower
triangular system whose matrix is the A-indexed submatrix of a Kronecker
product of univariate Newton matrices.  Downward closure lets that solve
split into one sweep per dimension: each sweep applies truncated univariate
forward substitution independently along every tube of that dimension.  The
total work is O(|A| * m * n) with an exact multiply-add count tracked per
batch, against a naive O(|A|^2 * m) reference solve kept here for oracle
testing.

Per level the tubes are grouped by length into position matrices, so each
group runs as a handful of vectorized triangular-solve steps instead of a
Python loop over tubes.  The same batches drive differentiation and the
basis change to orthonormal (tensor Legendre) coefficients: both matrices
are triangular in the degree-graded sense, so their truncated blocks act
tube-by-tube exactly like the transform itself.
"""
from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .mindex import MultiIndexSet, PNorm, colex_keys
from .nodes import NewtonVandermonde, NodeSystem, gauss_legendre
from .tubes import Selection, TubeDecomposition, precompute_level_selections, tube_decomposition

__all__ = [
    "LevelPlan",
    "NewtonInterpolant",
    "OpCounter",
    "plan",
    "fnt_forward",
    "fnt_inverse",
    "naive_solve",
    "evaluate",
    "evaluate_batch",
    "differentiate",
    "to_orthonormal",
    "newton_derivative_matrix",
    "newton_to_orthonormal_matrix",
    "write_coefficients_csv",
    "read_coefficients_csv",
    "write_coefficients_binary",
    "read_coefficients_binary",
    "BINARY_MAGIC",
]

NAIVE_SIZE_LIMIT = 100_000
BINARY_MAGIC = b"FNT1"


@dataclass
class OpCounter:
    """Accumulates the multiply-adds (divisions included) actually executed."""

    madds: int = 0


# ---------------------------------------------------------------------------
# level plan
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class LevelPlan:
    """Precomputed execution layout of the transform.

    ``batches[d]`` holds (length, positions) pairs for dimension d: each
    positions matrix lists, row by row, where the tubes of that length live
    inside the coefficient vector, ordered by ascending degree along d.
    The tube decomposition doubles as the block bookkeeping: the level-1
    blocks have lengths t1, and the merge groups feeding level l have sizes
    t1[:entropy[l-1]].
    """

    A: MultiIndexSet
    tubes: TubeDecomposition
    batches: list
    selections: list | None = None
    _eval_batches: list | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.A)

    @property
    def m(self) -> int:
        return self.A.m

    def block_lengths(self) -> np.ndarray:
        """Lengths of the level-1 blocks (the axis-1 tubes)."""
        return self.tubes.t1

    def block_count_after(self, level: int) -> int:
        """Number of blocks remaining once level ``level`` has merged."""
        if not 1 <= level <= self.m:
            raise ValueError(f"level must be in 1..{self.m}, got {level}")
        return int(self.tubes.entropy[level - 1])

    def merge_group_sizes(self, level: int) -> np.ndarray:
        """Sizes of the merge groups processed at level ``level`` (>= 2)."""
        if not 2 <= level <= self.m:
            raise ValueError(f"merge groups exist for levels 2..{self.m}, got {level}")
        return self.tubes.t1[:self.tubes.entropy[level - 1]]

    def level_selections(self) -> list[list[Selection]]:
        if self.selections is None:
            self.selections = precompute_level_selections(self.A)
        return self.selections

    def forward_op_count(self) -> int:
        """Exact multiply-adds of one forward (or inverse) pass."""
        total = 0
        for level in self.batches:
            for length, positions in level:
                total += positions.shape[0] * (length * (length - 1) // 2 + length - 1)
        return total


def _level_batches(indices: np.ndarray, base: int) -> list:
    """(length, positions) batches of the tubes along every dimension."""
    size, m = indices.shape
    full_keys = colex_keys(indices, base)
    weights = base ** np.arange(m, dtype=np.int64)
    levels = []
    for d in range(m):
        keys = full_keys - indices[:, d].astype(np.int64) * weights[d]
        order = np.argsort(keys, kind="stable").astype(np.int64)
        sorted_keys = keys[order]
        change = np.flatnonzero(sorted_keys[1:] != sorted_keys[:-1]) + 1
        starts = np.concatenate(([0], change))
        lengths = np.diff(np.concatenate((starts, [size])))
        batches = []
        for length in np.unique(lengths):
            sel = starts[lengths == length]
            positions = order[sel[:, None] + np.arange(length)[None, :]]
            batches.append((int(length), positions.astype(np.int32)))
        levels.append(batches)
    return levels


def plan(A: MultiIndexSet, tubes: TubeDecomposition | None = None,
         selections: list | None = None) -> LevelPlan:
    """Build the execution plan for transforms over A.

    The tube decomposition and the per-block selection table are derived on
    demand when not supplied.
    """
    if tubes is None:
        tubes = tube_decomposition(A)
    batches = _level_batches(A.indices, A.n + 1)
    return LevelPlan(A=A, tubes=tubes, batches=batches, selections=selections)


# ---------------------------------------------------------------------------
# forward / inverse transform
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class NewtonInterpolant:
    """Multivariate polynomial in Newton form over an index set.

    ``coeffs[i]`` multiplies the Newton basis product for ``A.indices[i]``.
    """

    A: MultiIndexSet
    nodes: NodeSystem
    coeffs: np.ndarray
    _plan: LevelPlan | None = field(default=None, repr=False)

    def plan(self) -> LevelPlan:
        if self._plan is None:
            self._plan = plan(self.A)
        return self._plan


def _solve_batch(work: np.ndarray, mat: np.ndarray, length: int,
                 positions: np.ndarray) -> None:
    values = work[positions]
    for i in range(1, length):
        values[:, i] -= values[:, :i] @ mat[i, :i]
        values[:, i] /= mat[i, i]
    work[positions] = values


def _multiply_batch(work: np.ndarray, mat: np.ndarray, length: int,
                    positions: np.ndarray) -> None:
    work[positions] = work[positions] @ mat[:length, :length].T


def _run_level(work: np.ndarray, batches: list, mat: np.ndarray, kernel,
               counter: OpCounter | None, threads: int) -> None:
    todo = [(length, positions) for length, positions in batches if length > 1]
    if counter is not None:
        for length, positions in todo:
            counter.madds += positions.shape[0] * (length * (length - 1) // 2 + length - 1)
    if threads > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda b: kernel(work, mat, b[0], b[1]), todo))
    else:
        for length, positions in todo:
            kernel(work, mat, length, positions)


def fnt_forward(samples: np.ndarray, level_plan: LevelPlan, L: NewtonVandermonde,
                counter: OpCounter | None = None, threads: int = 1) -> NewtonInterpolant:
    """Newton coefficients of grid samples, one triangular sweep per dimension.

    Parameters
    ----------
    samples : ndarray, shape (|A|,)
        Function values on the grid, aligned with the co-lex index order.
    level_plan : LevelPlan
    L : NewtonVandermonde
        Univariate Newton matrix over at least n+1 nodes.
    counter : OpCounter, optional
        Accumulates the exact multiply-add count of this call.
    threads : int
        Worker threads across the independent batches of each level.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape != (level_plan.size,):
        raise ValueError(f"expected {level_plan.size} samples, got shape {samples.shape}")
    if L.matrix.shape[0] < level_plan.A.n + 1:
        raise ValueError("node system is smaller than the degree bound")
    work = samples.copy()
    for batches in level_plan.batches:
        _run_level(work, batches, L.matrix, _solve_batch, counter, threads)
    return NewtonInterpolant(A=level_plan.A, nodes=L.nodes, coeffs=work, _plan=level_plan)


def fnt_inverse(coeffs: np.ndarray, level_plan: LevelPlan, L: NewtonVandermonde,
                counter: OpCounter | None = None, threads: int = 1) -> np.ndarray:
    """Grid samples of a Newton coefficient vector (exact inverse of
    fnt_forward): the same sweeps in reverse order, each applying the
    triangular matrix instead of solving with it."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (level_plan.size,):
        raise ValueError(f"expected {level_plan.size} coefficients, got shape {coeffs.shape}")
    work = coeffs.copy()
    for batches in reversed(level_plan.batches):
        _run_level(work, batches, L.matrix, _multiply_batch, counter, threads)
    return work


def naive_solve(samples: np.ndarray, A: MultiIndexSet, L: NewtonVandermonde) -> NewtonInterpolant:
    """Reference solve of the full triangular system, rows built on the fly.

    The system matrix entry (i, j) is prod_d L[alpha_i_d][alpha_j_d]; under
    co-lex ordering of a downward-closed set it is lower triangular, so a
    single forward substitution suffices.  O(|A|^2 * m), guarded to index
    sets of at most 100k entries; exists as the independent oracle for
    fnt_forward.
    """
    size = len(A)
    if size > NAIVE_SIZE_LIMIT:
        raise ValueError(f"naive solve limited to {NAIVE_SIZE_LIMIT} indices, got {size}")
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape != (size,):
        raise ValueError(f"expected {size} samples, got shape {samples.shape}")
    idx = A.indices.astype(np.int64)
    mat = L.matrix
    coeffs = np.empty(size)
    for i in range(size):
        row = mat[idx[i, 0], idx[:i + 1, 0]].copy()
        for d in range(1, A.m):
            row *= mat[idx[i, d], idx[:i + 1, d]]
        coeffs[i] = (samples[i] - row[:i] @ coeffs[:i]) / row[i]
    return NewtonInterpolant(A=A, nodes=L.nodes, coeffs=coeffs)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _prefix_products(x: np.ndarray, points: np.ndarray, count: int) -> np.ndarray:
    """W[q, d, k] = prod_{j<k} (x[q, d] - points[j])."""
    q, m = x.shape
    W = np.ones((q, m, count))
    for k in range(1, count):
        W[:, :, k] = W[:, :, k - 1] * (x - points[k - 1])
    return W


def _eval_run_batches(level_plan: LevelPlan) -> list:
    """Per reduction step: (length, in_positions, out_positions) groups of
    the contiguous runs being collapsed."""
    if level_plan._eval_batches is not None:
        return level_plan._eval_batches
    t1, entropy = level_plan.tubes.t1, level_plan.tubes.entropy
    steps = []
    for d in range(level_plan.m):
        runs = t1[:entropy[d]]
        starts = np.cumsum(runs) - runs
        groups = []
        for length in np.unique(runs):
            sel = np.flatnonzero(runs == length)
            in_pos = (starts[sel][:, None] + np.arange(length)[None, :]).astype(np.int64)
            groups.append((int(length), in_pos, sel.astype(np.int64)))
        steps.append(groups)
    level_plan._eval_batches = steps
    return steps


def _evaluate_reduction(interp: NewtonInterpolant, X: np.ndarray) -> np.ndarray:
    level_plan = interp.plan()
    steps = _eval_run_batches(level_plan)
    entropy = level_plan.tubes.entropy
    count = interp.nodes.count
    total = X.shape[0]
    chunk = max(1, int(8_000_000 // max(len(interp.A), 1)))
    out = np.empty(total)
    for lo in range(0, total, chunk):
        hi = min(lo + chunk, total)
        W = _prefix_products(X[lo:hi], interp.nodes.points, count)
        work: np.ndarray | None = None  # step 0 reads the shared coeffs
        for d, groups in enumerate(steps):
            nxt = np.empty((hi - lo, int(entropy[d])))
            for length, in_pos, out_pos in groups:
                weights = W[:, d, :length]
                if work is None:
                    gathered = interp.coeffs[in_pos]
                    nxt[:, out_pos] = weights @ gathered.T
                else:
                    gathered = work[:, in_pos]
                    nxt[:, out_pos] = np.einsum("qrl,ql->qr", gathered, weights)
            work = nxt
        out[lo:hi] = work[:, 0]
    return out


def _evaluate_tensor(interp: NewtonInterpolant, X: np.ndarray) -> np.ndarray:
    """p = inf specialization: per-dimension tensor contractions."""
    base = interp.A.n + 1
    m = interp.A.m
    # co-lex flat order equals C order on axes (alpha_m, ..., alpha_1)
    tensor = interp.coeffs.reshape((base,) * m)
    total = X.shape[0]
    chunk = max(1, int(25_000_000 // max(base ** (m - 1), 1)))
    count = interp.nodes.count
    out = np.empty(total)
    for lo in range(0, total, chunk):
        hi = min(lo + chunk, total)
        W = _prefix_products(X[lo:hi], interp.nodes.points, count)[:, :, :base]
        cur = tensor.reshape(-1, base) @ W[:, 0, :].T  # contract dimension 1
        for d in range(1, m):
            cur = cur.reshape(base ** (m - 1 - d), base, hi - lo)
            cur = np.einsum("abq,qb->aq", cur, W[:, d, :])
        out[lo:hi] = cur[0]
    return out


def evaluate_batch(interp: NewtonInterpolant, X: np.ndarray) -> np.ndarray:
    """Evaluate the interpolant at a batch of points, shape (q, m) -> (q,).

    Runs the entropy-guided reduction: per dimension, every contiguous run
    of the current coefficient vector collapses to a weighted sum with the
    cached prefix products of that coordinate, so a point costs
    O(|A| * carry_count + m*n) rather than O(|A| * m).
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != interp.A.m:
        raise ValueError(f"points must have {interp.A.m} coordinates, got {X.shape[1]}")
    if X.shape[0] == 0:
        return np.empty(0)
    if interp.A.p.is_inf:
        return _evaluate_tensor(interp, X)
    return _evaluate_reduction(interp, X)


def evaluate(interp: NewtonInterpolant, x: np.ndarray) -> float:
    """Evaluate the interpolant at a single point."""
    return float(evaluate_batch(interp, np.asarray(x, dtype=np.float64)[None, :])[0])


# ---------------------------------------------------------------------------
# differentiation and basis change
# ---------------------------------------------------------------------------

def newton_derivative_matrix(L: NewtonVandermonde) -> np.ndarray:
    """Strictly upper matrix D with N_j' = sum_i D[i][j] N_i.

    Values of N_j' on the nodes come from the recurrence
    N'_{j+1} = N_j + (x - x_j) N'_j; their divided differences (one forward
    substitution per column) are the Newton coefficients.  Entries at or
    below the diagonal vanish analytically (differentiation drops the
    degree), so they are zeroed exactly.
    """
    mat = L.matrix
    pts = L.nodes.points
    count = mat.shape[0]
    dvals = np.zeros((count, count))
    for j in range(count - 1):
        dvals[:, j + 1] = mat[:, j] + (pts - pts[j]) * dvals[:, j]
    D = np.empty((count, count))
    for i in range(count):
        D[i] = (dvals[i] - mat[i, :i] @ D[:i]) / mat[i, i]
    return np.triu(D, 1)


def newton_to_orthonormal_matrix(L: NewtonVandermonde) -> np.ndarray:
    """Upper triangular Q mapping Newton coefficients to coefficients in the
    orthonormal Legendre basis of the uniform probability measure on [-1,1]
    (phi_k = sqrt(2k+1) P_k).

    Q[i][j] = <N_j, phi_i> computed by an (n+1)-point Gauss-Legendre rule,
    exact here because the integrands have degree <= 2n.  Sub-diagonal
    entries vanish analytically (phi_i is orthogonal to lower degrees) and
    are zeroed exactly.
    """
    count = L.matrix.shape[0]
    x, w = gauss_legendre(count)
    pts = L.nodes.points
    newton_vals = np.ones((count, count))
    for j in range(1, count):
        newton_vals[:, j] = newton_vals[:, j - 1] * (x - pts[j - 1])
    legendre = np.ones((count, count))
    if count > 1:
        legendre[1] = x
    for k in range(1, count - 1):
        legendre[k + 1] = ((2 * k + 1) * x * legendre[k] - k * legendre[k - 1]) / (k + 1)
    phi = legendre * np.sqrt(2 * np.arange(count) + 1)[:, None]
    Q = phi @ (newton_vals * (0.5 * w)[:, None])
    return np.triu(Q)


def _sweep(coeffs: np.ndarray, level_plan: LevelPlan, mat: np.ndarray,
           dims) -> np.ndarray:
    work = coeffs.copy()
    for d in dims:
        for length, positions in level_plan.batches[d]:
            work[positions] = work[positions] @ mat[:length, :length].T
    return work


def differentiate(interp: NewtonInterpolant, axis: int) -> NewtonInterpolant:
    """Partial derivative along ``axis`` (0-based), exact in Newton form.

    The derivative matrix is strictly upper triangular, so it maps each
    tube into itself (degree can only drop) and one sweep along the axis
    suffices; the result lives on the same index set.
    """
    if not 0 <= axis < interp.A.m:
        raise ValueError(f"axis must be in 0..{interp.A.m - 1}, got {axis}")
    D = newton_derivative_matrix(interp.nodes.vandermonde())
    coeffs = _sweep(interp.coeffs, interp.plan(), D, [axis])
    return NewtonInterpolant(A=interp.A, nodes=interp.nodes, coeffs=coeffs,
                             _plan=interp.plan())


def to_orthonormal(interp: NewtonInterpolant) -> np.ndarray:
    """Coefficients of the interpolant in the orthonormal tensor Legendre
    basis (uniform probability measure on the cube), aligned with A.

    One triangular sweep per dimension; downward closure keeps every sweep
    inside the index set, so the change of basis is exact.  The squared sum
    of the result is the mean square of the polynomial over the cube.
    """
    Q = newton_to_orthonormal_matrix(interp.nodes.vandermonde())
    return _sweep(interp.coeffs, interp.plan(), Q, range(interp.A.m))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def write_coefficients_csv(interp: NewtonInterpolant, path) -> None:
    """Index tuple + value per row, full float precision."""
    m = interp.A.m
    header = ",".join(f"alpha_{d + 1}" for d in range(m)) + ",value"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row, value in zip(interp.A.indices, interp.coeffs):
            fh.write(",".join(str(int(v)) for v in row) + f",{float(value)!r}\n")


def read_coefficients_csv(path, A: MultiIndexSet) -> np.ndarray:
    """Read a coefficient CSV written for ``A``; validates the index column."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (len(A), A.m + 1):
        raise ValueError(f"coefficient file shape {data.shape} does not match "
                         f"({len(A)}, {A.m + 1})")
    if not np.array_equal(data[:, :A.m].astype(np.int64), A.indices):
        raise ValueError("index tuples in file do not match the index set")
    return data[:, A.m].copy()


def write_coefficients_binary(interp: NewtonInterpolant, path) -> None:
    """Binary format: magic 'FNT1', little-endian u32 m, u32 n, f64 p,
    u64 count, then count f64 coefficients in co-lex order."""
    p = float(interp.A.p)
    head = BINARY_MAGIC + struct.pack("<IIdQ", interp.A.m, interp.A.n, p,
                                      len(interp.A))
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(interp.coeffs, dtype="<f8").tobytes())


def read_coefficients_binary(path):
    """Returns (m, n, PNorm, coeffs) from the binary format."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != BINARY_MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {BINARY_MAGIC!r}")
        m, n, p, count = struct.unpack("<IIdQ", fh.read(24))
        coeffs = np.frombuffer(fh.read(8 * count), dtype="<f8")
        if coeffs.shape[0] != count:
            raise ValueError("truncated coefficient payload")
    return m, n, PNorm(p), coeffs.astype(np.float64)
