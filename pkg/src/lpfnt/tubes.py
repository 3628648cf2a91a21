"""Tube decompositions of downward-closed index sets.

A *tube* along dimension 1 is a maximal run of indices that agree in every
coordinate except the first.  In co-lex order those runs are contiguous and,
by downward closure, each run carries first coordinates 0..t-1, so the whole
axis-1 structure compresses to an integer vector of run lengths.  Applying
the length-to-sum reduction repeatedly recovers the same structure for the
projected sets one dimension down, which is what makes single-vector storage
of the full hierarchical layout possible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mindex import MultiIndexSet, PNorm, build_index_set, colex_keys

__all__ = [
    "TubeDecomposition",
    "Selection",
    "first_tube_projection",
    "length_to_sum_reduce",
    "entropy_vector",
    "all_tube_projections",
    "tube_decomposition",
    "index_set_from_tubes",
    "ordinal_selection",
    "precompute_level_selections",
]


def first_tube_projection(A: MultiIndexSet) -> np.ndarray:
    """Run lengths along dimension 1, in co-lex order of the tails.

    For co-lex sorted downward-closed input this is a single linear scan:
    consecutive rows belong to the same tube iff they agree on coordinates
    2..m.

    Examples
    --------
    >>> first_tube_projection(build_index_set(3, 2, 1))
    array([3, 2, 1, 2, 1, 1])
    """
    idx = A.indices
    if A.m == 1:
        return np.array([idx.shape[0]], dtype=np.int64)
    tails = idx[:, 1:]
    change = np.any(tails[1:] != tails[:-1], axis=1)
    starts = np.concatenate(([0], np.flatnonzero(change) + 1))
    ends = np.concatenate((starts[1:], [idx.shape[0]]))
    return (ends - starts).astype(np.int64)


def length_to_sum_reduce(t: np.ndarray) -> np.ndarray:
    """Shortest prefix of ``t`` whose sum equals ``len(t)``.

    This maps the tube vector of a d-dimensional set to the tube vector of
    its (d-1)-dimensional projection: the projected set has len(t) elements,
    and its leading runs are exactly the prefix that accounts for them.
    Raises ValueError when no prefix sums to len(t).
    """
    t = np.asarray(t, dtype=np.int64)
    target = t.shape[0]
    sums = np.cumsum(t)
    j = int(np.searchsorted(sums, target))
    if j >= t.shape[0] or sums[j] != target:
        raise ValueError("no prefix sums to the vector length; not a valid tube vector")
    return t[:j + 1].copy()


def entropy_vector(t: np.ndarray, m: int) -> np.ndarray:
    """Lengths of the m successive reductions of ``t`` (the first entry is
    len(t) itself).  entry i is the cardinality of the projection onto the
    last m-i dimensions."""
    t = np.asarray(t, dtype=np.int64)
    e = [t.shape[0]]
    cur = t
    for _ in range(m - 1):
        cur = length_to_sum_reduce(cur)
        e.append(cur.shape[0])
    return np.array(e, dtype=np.int64)


@dataclass(eq=False)
class TubeDecomposition:
    """Axis-1 tube vector plus the entropy vector of its reductions.

    ``t1[:entropy[i]]`` is the tube vector of the projection of A onto its
    last m-i dimensions, so this pair encodes the run structure of every
    level of the hierarchical transform.
    """

    m: int
    n: int
    p: PNorm
    t1: np.ndarray
    entropy: np.ndarray


def tube_decomposition(A: MultiIndexSet) -> TubeDecomposition:
    t1 = first_tube_projection(A)
    return TubeDecomposition(m=A.m, n=A.n, p=A.p, t1=t1,
                             entropy=entropy_vector(t1, A.m))


def all_tube_projections(A: MultiIndexSet) -> list[np.ndarray]:
    """Tube vectors of all m successive projections, via truncation of the
    axis-1 vector (one scan total, never m traversals)."""
    dec = tube_decomposition(A)
    return [dec.t1[:e] for e in dec.entropy]


def index_set_from_tubes(t1: np.ndarray, m: int) -> np.ndarray:
    """Rebuild the co-lex index rows from the axis-1 tube vector alone.

    The tails are the rebuilt (m-1)-dimensional set, one per run; the first
    coordinate counts 0..length-1 inside each run.
    """
    t1 = np.asarray(t1, dtype=np.int64)
    if m == 1:
        return np.arange(int(t1[0]), dtype=np.int16).reshape(-1, 1)
    tails = index_set_from_tubes(length_to_sum_reduce(t1), m - 1)
    total = int(t1.sum())
    out = np.empty((total, m), dtype=np.int16)
    out[:, 1:] = np.repeat(tails, t1, axis=0)
    starts = np.repeat(np.cumsum(t1) - t1, t1)
    out[:, 0] = np.arange(total) - starts
    return out


# ---------------------------------------------------------------------------
# ordinal selections
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Selection:
    """Positions of a sub index set inside a super index set, both co-lex.

    ``positions`` is strictly increasing and 0-based.  Gathering a vector
    over the super set at these positions restricts it to the sub set.
    """

    sub_size: int
    sup_size: int
    positions: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values)[..., self.positions]

    def scatter(self, sub_values: np.ndarray, out: np.ndarray) -> np.ndarray:
        out[..., self.positions] = sub_values
        return out


def ordinal_selection(A_sub: MultiIndexSet, A_sup: MultiIndexSet) -> Selection:
    """Embedding positions of A_sub inside A_sup (ordinal, not boolean).

    Raises ValueError when A_sub is not contained in A_sup.
    """
    if A_sub.m != A_sup.m:
        raise ValueError(f"dimension mismatch: {A_sub.m} vs {A_sup.m}")
    base = max(A_sub.n, A_sup.n) + 1
    sub_keys = colex_keys(A_sub.indices, base)
    sup_keys = colex_keys(A_sup.indices, base)
    pos = np.searchsorted(sup_keys, sub_keys)
    ok = (pos < sup_keys.shape[0])
    if not np.all(ok) or not np.array_equal(sup_keys[pos], sub_keys):
        raise ValueError("sub index set is not contained in the super set")
    return Selection(sub_size=len(A_sub), sup_size=len(A_sup),
                     positions=pos.astype(np.int64))


def _selection_from_rows(sub_rows: np.ndarray, sup_rows: np.ndarray, base: int) -> Selection:
    sub_keys = colex_keys(sub_rows, base) if sub_rows.shape[1] else np.zeros(len(sub_rows), np.int64)
    sup_keys = colex_keys(sup_rows, base) if sup_rows.shape[1] else np.zeros(len(sup_rows), np.int64)
    pos = np.searchsorted(sup_keys, sub_keys)
    return Selection(sub_size=sub_rows.shape[0], sup_size=sup_rows.shape[0],
                     positions=pos.astype(np.int64))


def precompute_level_selections(A: MultiIndexSet) -> list[list[Selection]]:
    """Per-level table of the distinct block embeddings used when merging.

    At level l >= 2 the rows of A split into groups sharing coordinates
    l+1..m; inside a group the sub-blocks share the value of coordinate l,
    and every sub-block with value j >= 1 embeds into the largest sub-block
    (value 0) through the ordinal selection of its leading (l-1)-coordinate
    rows.  Duplicate embeddings are returned once, in first-occurrence
    order.  Level 1 needs no alignment (runs are contiguous), so its list is
    empty except in the univariate case, where the table degenerates to the
    identity selection.
    """
    idx = A.indices
    size, m = idx.shape
    base = A.n + 1
    if m == 1:
        return [[Selection(size, size, np.arange(size, dtype=np.int64))]]
    levels: list[list[Selection]] = [[]]
    for level in range(2, m + 1):
        col = level - 1
        tail = idx[:, level:]
        if tail.shape[1]:
            change = np.any(tail[1:] != tail[:-1], axis=1)
            group_starts = np.concatenate(([0], np.flatnonzero(change) + 1, [size]))
        else:
            group_starts = np.array([0, size])
        seen: dict[bytes, Selection] = {}
        table: list[Selection] = []
        for g in range(group_starts.shape[0] - 1):
            lo, hi = int(group_starts[g]), int(group_starts[g + 1])
            vals = idx[lo:hi, col]
            sub_change = np.flatnonzero(vals[1:] != vals[:-1]) + 1
            block_starts = np.concatenate(([0], sub_change, [hi - lo])) + lo
            sup_rows = idx[block_starts[0]:block_starts[1], :col]
            for b in range(1, block_starts.shape[0] - 1):
                sub_rows = idx[block_starts[b]:block_starts[b + 1], :col]
                key = (sub_rows.tobytes(), sup_rows.tobytes())
                sel = seen.get(key)
                if sel is None:
                    sel = _selection_from_rows(sub_rows, sup_rows, base)
                    seen[key] = sel
                    table.append(sel)
        levels.append(table)
    return levels
