"""Downward-closed multi-index sets with bounded lp-degree.

The central object is the set of exponent vectors

    A(m, n, p) = { alpha in N_0^m : ||alpha||_p <= n },

stored as an integer array in co-lexicographic order (compare reversed
tuples; equivalently, dimension 1 varies fastest).  These sets index both
the polynomial space spanned by ``x^alpha`` and the interpolation grid, so
everything downstream (tube decompositions, the transform, sensitivity
analysis) leans on the ordering and downward closure guaranteed here.

Degree parameters:

* ``p = 1``    total degree, cardinality C(m+n, n)
* ``p = 2``    Euclidean degree (the sweet spot for analytic functions)
* ``p = inf``  maximum degree, full tensor grid, cardinality (n+1)^m
* ``0 < p < 1``sparser-than-total-degree spaces
* ``p = 0``    additively separable limit {0} union {k*e_i}, cardinality m*n+1
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "PNorm",
    "MultiIndexSet",
    "CardinalityBounds",
    "build_index_set",
    "cardinality",
    "cardinality_closed_form",
    "orthant_ball_volume",
    "cardinality_bounds",
    "density",
    "carry_count",
    "colex_keys",
    "write_index_set",
    "read_index_set",
]

_INF = math.inf


# ---------------------------------------------------------------------------
# degree parameter
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PNorm:
    """Validated lp-degree parameter: a float in [0, inf]."""

    value: float

    def __post_init__(self) -> None:
        v = float(self.value)
        if math.isnan(v) or v < 0.0:
            raise ValueError(f"p must be in [0, inf], got {self.value!r}")
        object.__setattr__(self, "value", v)

    @classmethod
    def of(cls, p: "PNorm | float | int | str") -> "PNorm":
        if isinstance(p, PNorm):
            return p
        if isinstance(p, str):
            s = p.strip().lower()
            if s in ("inf", "infinity"):
                return cls(_INF)
            return cls(float(s))
        return cls(float(p))

    @property
    def is_inf(self) -> bool:
        return math.isinf(self.value)

    def __float__(self) -> float:
        return self.value

    def __str__(self) -> str:
        if self.is_inf:
            return "inf"
        if self.value == int(self.value):
            return str(int(self.value))
        return repr(self.value)

    def __repr__(self) -> str:
        return f"PNorm({self})"


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def _degree_costs(n: int, p: float):
    """Per-degree membership costs and the total budget.

    Integer p uses exact int64 power sums; fractional p uses float64 with a
    plain <= comparison.  Ties on a single axis are exact either way because
    cost and budget come from the same power evaluation.
    """
    degrees = np.arange(n + 1)
    if math.isinf(p):
        return np.zeros(n + 1, dtype=np.int64), np.int64(0)
    if float(p).is_integer() and p > 0 and p * math.log2(max(n, 2)) < 62:
        ip = int(p)
        costs = degrees.astype(np.int64) ** ip
        return costs, np.int64(n) ** ip
    costs = np.power(degrees.astype(np.float64), p)
    return costs, np.float64(n) ** p


def _enumerate_lp(m: int, n: int, p: float):
    """Rows of A(m,n,p) in co-lex order plus per-dimension cardinalities.

    Grows one dimension at a time.  Appending the new (slowest-varying)
    coordinate in ascending order while preserving the previous ordering of
    the filtered prefixes keeps the output co-lexicographic at every step,
    and the row count after d steps is |A(d, n, p)|.
    """
    costs, budget = _degree_costs(n, p)
    rows = np.zeros((1, 0), dtype=np.int16)
    remaining = np.array([budget])
    counts: list[int] = []
    for d in range(m):
        masks = []
        sizes = []
        for j in range(n + 1):
            mask = remaining >= costs[j]
            cnt = int(np.count_nonzero(mask))
            if cnt == 0:
                break  # costs grow with j, nothing larger fits
            masks.append(mask)
            sizes.append(cnt)
        total = sum(sizes)
        out = np.empty((total, d + 1), dtype=np.int16)
        new_remaining = np.empty(total, dtype=remaining.dtype)
        offset = 0
        for j, (mask, cnt) in enumerate(zip(masks, sizes)):
            out[offset:offset + cnt, :d] = rows[mask]
            out[offset:offset + cnt, d] = j
            new_remaining[offset:offset + cnt] = remaining[mask] - costs[j]
            offset += cnt
        rows, remaining = out, new_remaining
        counts.append(total)
    return rows, tuple(counts)


def _enumerate_p0(m: int, n: int):
    """A(m,n,0) = {0} union {k*e_i}, already in co-lex order."""
    size = m * n + 1
    rows = np.zeros((size, m), dtype=np.int16)
    for i in range(m):
        rows[1 + i * n: 1 + (i + 1) * n, i] = np.arange(1, n + 1, dtype=np.int16)
    counts = tuple(k * n + 1 for k in range(1, m + 1))
    return rows, counts


# ---------------------------------------------------------------------------
# the set
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class MultiIndexSet:
    """Multi-index set in co-lexicographic order.

    Attributes
    ----------
    m : int
        Number of dimensions.
    n : int
        Degree bound.
    p : PNorm
        lp-degree parameter.
    indices : ndarray, shape (N, m), dtype int16
        Exponent vectors, co-lex sorted (dimension 1 varies fastest).
    dim_cardinalities : tuple of int
        |A(k, n, p)| for k = 1..m, byproduct of the enumeration.
    """

    m: int
    n: int
    p: PNorm
    indices: np.ndarray
    dim_cardinalities: tuple = field(repr=False, default=())

    def __len__(self) -> int:
        return self.indices.shape[0]

    def __iter__(self) -> Iterator[tuple]:
        for row in self.indices:
            yield tuple(int(v) for v in row)

    def as_tuples(self) -> list[tuple]:
        return list(self)

    def __repr__(self) -> str:
        return (f"MultiIndexSet(m={self.m}, n={self.n}, p={self.p}, "
                f"size={len(self)})")


def build_index_set(m: int, n: int, p) -> MultiIndexSet:
    """Enumerate A(m, n, p) in co-lexicographic order.

    Parameters
    ----------
    m : int
        Number of dimensions, must be >= 1.
    n : int
        Degree bound, must be >= 0.
    p : PNorm, float, or str
        lp-degree parameter in [0, inf].

    Returns
    -------
    MultiIndexSet

    Examples
    --------
    >>> build_index_set(2, 2, 1).as_tuples()
    [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (0, 2)]
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    pn = PNorm.of(p)
    if pn.value == 0.0:
        rows, counts = _enumerate_p0(m, n)
    else:
        rows, counts = _enumerate_lp(m, n, pn.value)
    return MultiIndexSet(m=m, n=n, p=pn, indices=rows, dim_cardinalities=counts)


def colex_keys(indices: np.ndarray, base: int) -> np.ndarray:
    """Encode rows as integers whose numeric order is the co-lex order.

    Dimension 1 is the least significant digit.  Raises if base**m would
    overflow the int64 key space.
    """
    m = indices.shape[1]
    if m * math.log2(max(base, 2)) > 62:
        raise ValueError(f"co-lex keys overflow int64 for base={base}, m={m}")
    weights = base ** np.arange(m, dtype=np.int64)
    return indices.astype(np.int64) @ weights


# ---------------------------------------------------------------------------
# cardinalities and bounds
# ---------------------------------------------------------------------------

def cardinality_closed_form(m: int, n: int, p) -> int:
    """Exact |A(m, n, p)| for the three closed-form parameters.

    p = 0 gives m*n + 1, p = 1 gives C(n+m, n), p = inf gives (n+1)**m.
    Exact Python integers, no overflow.  Other p raise ValueError.
    """
    if m < 1 or n < 0:
        raise ValueError(f"need m >= 1 and n >= 0, got m={m}, n={n}")
    pn = PNorm.of(p)
    if pn.value == 0.0:
        return m * n + 1
    if pn.value == 1.0:
        return math.comb(n + m, n)
    if pn.is_inf:
        return (n + 1) ** m
    raise ValueError(f"closed form defined for p in {{0, 1, inf}}, got p={pn}")


def cardinality(m: int, n: int, p) -> int:
    """|A(m, n, p)|: closed form when available, enumeration otherwise."""
    pn = PNorm.of(p)
    if pn.value in (0.0, 1.0) or pn.is_inf:
        return cardinality_closed_form(m, n, pn)
    return len(build_index_set(m, n, pn))


def orthant_ball_volume(m: int, r: float, p) -> float:
    """Volume of the positive orthant of the lp ball of radius r in R^m.

        vol = r^m * Gamma(1 + 1/p)^m / Gamma(1 + m/p)

    evaluated through log-Gamma for stability.  Requires r > 0 and
    p in (0, inf).
    """
    pn = PNorm.of(p)
    if not (0.0 < pn.value < _INF):
        raise ValueError(f"orthant ball volume needs p in (0, inf), got {pn}")
    if r <= 0:
        raise ValueError(f"radius must be positive, got {r}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    p_ = pn.value
    return math.exp(m * math.log(r) + m * math.lgamma(1.0 + 1.0 / p_)
                    - math.lgamma(1.0 + m / p_))


@dataclass(frozen=True)
class CardinalityBounds:
    """Analytic envelopes around |A(m, n, p)|.

    ``lower``/``upper`` sandwich the cardinality by orthant ball volumes
    (upper requires p >= 1, lower requires p > 0).  ``memory_bound`` is the
    coefficient-storage envelope, defined for p <= 2.  ``density`` is
    |A| / (n+1)^m and ``carry_count`` is sum_k |A(k,n,p)| / |A(m,n,p)|,
    the amortized number of tube visits per coefficient.
    """

    m: int
    n: int
    p: PNorm
    cardinality: int
    lower: float | None
    upper: float | None
    memory_bound: float | None
    density: float
    carry_count: float


def _memory_bound(m: int, n: int, p: float) -> float | None:
    if p <= 1.0:
        return p * math.comb(m + n, m) + (1.0 - p) * (1.0 + m * n)
    if p <= 2.0:
        log_val = (m * (math.log(n + m ** (1.0 / p))
                        + math.log(p * math.e / m) / p
                        + math.lgamma(1.0 + 1.0 / p))
                   + 0.5 * math.log(p / (2.0 * math.pi * m)))
        return math.exp(log_val)
    return None


def cardinality_bounds(m: int, n: int, p, index_set: MultiIndexSet | None = None) -> CardinalityBounds:
    """Cardinality plus its analytic envelopes for A(m, n, p).

    Passing a prebuilt ``index_set`` avoids re-enumeration.  n must be >= 1
    (the envelopes degenerate at n = 0).
    """
    pn = PNorm.of(p)
    if n < 1:
        raise ValueError(f"bounds need n >= 1, got {n}")
    if index_set is None and not (pn.value in (0.0, 1.0) or pn.is_inf):
        index_set = build_index_set(m, n, pn)
    if index_set is not None:
        size = len(index_set)
        kappa = sum(index_set.dim_cardinalities) / size
    else:
        size = cardinality_closed_form(m, n, pn)
        kappa = carry_count(m, n, pn)
    lower = upper = None
    if 0.0 < pn.value < _INF:
        lower = orthant_ball_volume(m, n, pn)
        if pn.value >= 1.0:
            upper = orthant_ball_volume(m, n + m ** (1.0 / pn.value), pn)
    return CardinalityBounds(
        m=m, n=n, p=pn,
        cardinality=size,
        lower=lower,
        upper=upper,
        memory_bound=None if pn.is_inf else _memory_bound(m, n, pn.value),
        density=size / float((n + 1) ** m),
        carry_count=kappa,
    )


def density(m: int, n: int, p, index_set: MultiIndexSet | None = None) -> float:
    """|A(m, n, p)| relative to the full tensor grid (n+1)^m."""
    size = len(index_set) if index_set is not None else cardinality(m, n, p)
    return size / float((n + 1) ** m)


def carry_count(m: int, n: int, p, index_set: MultiIndexSet | None = None) -> float:
    """Amortized tube visits per coefficient: sum_k |A(k,n,p)| / |A(m,n,p)|."""
    if index_set is not None:
        return sum(index_set.dim_cardinalities) / len(index_set)
    pn = PNorm.of(p)
    if pn.value in (0.0, 1.0) or pn.is_inf:
        per_dim = [cardinality_closed_form(k, n, pn) for k in range(1, m + 1)]
        return sum(per_dim) / per_dim[-1]
    return carry_count(m, n, pn, build_index_set(m, n, pn))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def write_index_set(A: MultiIndexSet, path) -> None:
    """Write the line-oriented text format: 'm n p' header, one index per line."""
    with open(path, "w") as fh:
        fh.write(f"{A.m} {A.n} {A.p}\n")
        np.savetxt(fh, A.indices, fmt="%d")


def read_index_set(path) -> MultiIndexSet:
    """Read the text format back; re-enumerates to restore derived fields and
    validates that the stored rows match."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"malformed index set header in {path}")
        m, n, p = int(header[0]), int(header[1]), PNorm.of(header[2])
        rows = np.loadtxt(fh, dtype=np.int64, ndmin=2)
    A = build_index_set(m, n, p)
    if rows.shape != A.indices.shape or not np.array_equal(rows, A.indices):
        raise ValueError(f"index rows in {path} do not match A({m},{n},{p})")
    return A
