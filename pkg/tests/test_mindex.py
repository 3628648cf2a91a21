"""Index set enumeration, closed forms, and the cardinality bound suite."""
import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import lpfnt as lp

EXAMPLE_M3_N2_P1 = [
    (0, 0, 0), (1, 0, 0), (2, 0, 0), (0, 1, 0), (1, 1, 0),
    (0, 2, 0), (0, 0, 1), (1, 0, 1), (0, 1, 1), (0, 0, 2),
]

P_MENU = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, math.inf]


def box_filter(m, n, p):
    """Independent enumeration: filter the full tensor box in co-lex order.

    Membership mirrors the documented semantics: exact integer power sums
    for integer p, float64 budget subtraction for fractional p.
    """
    if not math.isinf(p):
        costs = np.power(np.arange(n + 1, dtype=np.float64), p)
        budget = np.float64(n) ** p
    out = []
    for rev in product(range(n + 1), repeat=m):
        alpha = rev[::-1]  # first coordinate varies fastest: co-lex ascending
        if math.isinf(p):
            keep = True
        elif p == 0:
            keep = sum(a > 0 for a in alpha) <= 1
        elif float(p).is_integer():
            q = int(p)
            keep = sum(a ** q for a in alpha) <= n ** q
        else:
            remaining = float(budget)
            for a in alpha:
                remaining -= float(costs[a])
            keep = remaining >= 0.0
        if keep:
            out.append(alpha)
    return out


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def test_example_m3_n2_p1_is_exact():
    A = lp.build_index_set(3, 2, 1)
    assert len(A) == 10
    assert A.as_tuples() == EXAMPLE_M3_N2_P1
    assert A.dim_cardinalities == (3, 6, 10)


@settings(deadline=None, max_examples=60)
@given(m=st.integers(1, 4), n=st.integers(0, 5), p=st.sampled_from(P_MENU))
def test_enumeration_matches_box_filter(m, n, p):
    A = lp.build_index_set(m, n, p)
    assert A.as_tuples() == box_filter(m, n, p)


@settings(deadline=None, max_examples=60)
@given(m=st.integers(1, 5), n=st.integers(0, 6), p=st.sampled_from(P_MENU))
def test_downward_closure(m, n, p):
    A = lp.build_index_set(m, n, p)
    assert len(A) <= 100_000
    members = set(A.as_tuples())
    for alpha in members:
        for d in range(m):
            if alpha[d] > 0:
                below = alpha[:d] + (alpha[d] - 1,) + alpha[d + 1:]
                assert below in members


@settings(deadline=None, max_examples=40)
@given(m=st.integers(1, 4), n=st.integers(0, 5), p=st.sampled_from(P_MENU))
def test_colex_keys_strictly_increasing(m, n, p):
    A = lp.build_index_set(m, n, p)
    keys = lp.colex_keys(A.indices, n + 1)
    assert np.all(np.diff(keys) > 0)
    # co-lex comparison = lexicographic on the reversed tuples
    tuples = A.as_tuples()
    assert tuples == sorted(tuples, key=lambda t: t[::-1])


def test_dim_cardinalities_are_prefix_counts():
    A = lp.build_index_set(4, 3, 1.5)
    for k in range(1, 5):
        assert A.dim_cardinalities[k - 1] == len(lp.build_index_set(k, 3, 1.5))


def test_n_zero_collapses_to_origin():
    for p in (0, 1, 2, math.inf):
        A = lp.build_index_set(3, 0, p)
        assert A.as_tuples() == [(0, 0, 0)]


def test_invalid_parameters_raise():
    with pytest.raises(ValueError):
        lp.build_index_set(0, 2, 1)
    with pytest.raises(ValueError):
        lp.build_index_set(2, -1, 1)
    with pytest.raises(ValueError):
        lp.PNorm.of(-1)
    with pytest.raises(ValueError):
        lp.PNorm.of(math.nan)


def test_pnorm_parsing_and_formatting():
    assert lp.PNorm.of("inf").is_inf
    assert lp.PNorm.of("Infinity").is_inf
    assert float(lp.PNorm.of("2")) == 2.0
    assert str(lp.PNorm.of(2.0)) == "2"
    assert str(lp.PNorm.of(0.5)) == "0.5"
    assert str(lp.PNorm.of(math.inf)) == "inf"
    assert lp.PNorm.of(lp.PNorm.of(1)) == lp.PNorm.of(1)


# ---------------------------------------------------------------------------
# cardinalities
# ---------------------------------------------------------------------------

def test_closed_forms_match_enumeration():
    for m in range(1, 6):
        for n in range(0, 7):
            assert lp.cardinality_closed_form(m, n, 0) == m * n + 1
            assert lp.cardinality_closed_form(m, n, 1) == math.comb(n + m, m)
            assert lp.cardinality_closed_form(m, n, math.inf) == (n + 1) ** m
            for p in (0, 1, math.inf):
                assert lp.cardinality_closed_form(m, n, p) == len(lp.build_index_set(m, n, p))


def test_closed_form_rejects_general_p():
    with pytest.raises(ValueError):
        lp.cardinality_closed_form(3, 2, 2)


def test_cardinality_dispatches_on_p():
    assert lp.cardinality(3, 2, 1) == 10
    assert lp.cardinality(2, 3, 0) == 7
    assert lp.cardinality(4, 3, math.inf) == 256
    assert lp.cardinality(5, 8, 2) == 9389


def test_benchmark_cardinalities():
    assert lp.cardinality(5, 8, 2) == 9389
    assert lp.cardinality(6, 10, 2) == 145138


# ---------------------------------------------------------------------------
# density and carry count
# ---------------------------------------------------------------------------

def test_density_examples():
    assert lp.density(3, 2, 1) == pytest.approx(10 / 27)
    assert lp.density(2, 3, 0) == pytest.approx(7 / 16)
    for m, n in [(2, 3), (3, 2), (4, 1)]:
        assert lp.density(m, n, math.inf) == 1.0


def test_density_decays_in_dimension():
    for p in (0.5, 1, 2):
        values = [lp.density(m, 6, p) for m in range(1, 7)]
        assert all(a > b for a, b in zip(values, values[1:]))


def test_carry_count_examples():
    assert lp.carry_count(2, 1, math.inf) == pytest.approx(1.5)
    assert lp.carry_count(2, 2, 1) == pytest.approx(1.5)
    for n in (1, 3, 6):
        for p in (0.5, 1, 2, math.inf):
            assert lp.carry_count(1, n, p) == pytest.approx(1.0)


def test_carry_count_matches_per_dimension_rebuild():
    for m, n, p in [(3, 4, 1.5), (4, 3, 2), (3, 3, 0.5), (4, 4, 1)]:
        total = sum(len(lp.build_index_set(k, n, p)) for k in range(1, m + 1))
        expected = total / len(lp.build_index_set(m, n, p))
        assert lp.carry_count(m, n, p) == pytest.approx(expected, rel=1e-12)


def test_carry_count_analytic_bound():
    # e / (1 - (m^{1/p} + 1)/(n + 1)) dominates whenever m <= n^{p/(p+1)};
    # at m = n = 1 the denominator hits zero and the bound is vacuous
    for p in (1.5, 2, 3):
        for n in range(1, 9):
            for m in range(1, 7):
                if m > n ** (p / (p + 1)):
                    continue
                denom = 1 - (m ** (1 / p) + 1) / (n + 1)
                if denom <= 0:
                    continue
                assert lp.carry_count(m, n, p) <= math.e / denom + 1e-12


# ---------------------------------------------------------------------------
# analytic bounds
# ---------------------------------------------------------------------------

def test_volume_closed_forms():
    # p = 1 orthant simplex and p = 2 quarter disc have elementary volumes
    for m in (1, 2, 3, 4):
        for r in (1.0, 2.5, 7.0):
            assert lp.orthant_ball_volume(m, r, 1) == pytest.approx(r ** m / math.factorial(m))
    assert lp.orthant_ball_volume(2, 3.0, 2) == pytest.approx(math.pi * 9 / 4)
    assert lp.orthant_ball_volume(3, 1.0, 2) == pytest.approx(math.pi / 6)


def test_volume_sandwich():
    # the 1e-12 relative slack covers log-gamma roundoff where the bound is
    # attained exactly, e.g. upper = n + 1 = |A| for m = 1, p >= 1
    for p in (0.5, 1, 1.5, 2, 3):
        for m in range(1, 6):
            for n in range(1, 9):
                size = lp.cardinality(m, n, p)
                assert lp.orthant_ball_volume(m, n, p) <= size * (1 + 1e-12)
                if p >= 1:
                    upper = lp.orthant_ball_volume(m, n + m ** (1 / p), p)
                    assert size <= upper * (1 + 1e-12)


def test_cardinality_bounds_fields():
    b = lp.cardinality_bounds(3, 2, 1)
    assert b.cardinality == 10
    assert b.memory_bound == pytest.approx(math.comb(5, 3))
    assert b.density == pytest.approx(10 / 27)
    assert b.lower is not None and b.lower <= 10
    assert b.upper is not None and 10 <= b.upper


def test_memory_bound_dominates():
    for p in (0, 0.25, 0.5, 0.75, 1, 1.5, 2):
        for m in range(1, 7):
            for n in range(1, 9):
                b = lp.cardinality_bounds(m, n, p)
                assert b.memory_bound is not None
                assert b.cardinality <= b.memory_bound + 1e-9


def test_jensen_convexity_in_p():
    # blending the total-degree exponent toward the additive one: the set at
    # the mixed exponent never exceeds the mixed cardinality.  The analogous
    # blend toward p2 = 2 fails on small sets (|A(2,3,1.75)| = 11 exceeds
    # 0.25*10 + 0.75*11 = 10.75), so only the p2 = 0 leg is asserted.
    p1 = 1.0
    p2 = 0.0
    for theta in (0.25, 0.5, 0.75):
        p = theta * p1 + (1 - theta) * p2
        for m in range(1, 5):
            for n in range(1, 7):
                mix = theta * lp.cardinality(m, n, p1) + (1 - theta) * lp.cardinality(m, n, p2)
                assert lp.cardinality(m, n, p) <= mix + 1e-9


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_index_set_round_trip(tmp_path):
    for m, n, p in [(3, 2, 1), (2, 4, 0.5), (2, 2, math.inf), (4, 3, 0)]:
        path = tmp_path / f"a_{m}_{n}.txt"
        A = lp.build_index_set(m, n, p)
        lp.write_index_set(A, path)
        B = lp.read_index_set(path)
        assert B.m == A.m and B.n == A.n and float(B.p) == float(A.p)
        assert np.array_equal(B.indices, A.indices)


def test_index_set_read_rejects_corruption(tmp_path):
    path = tmp_path / "a.txt"
    lp.write_index_set(lp.build_index_set(3, 2, 1), path)
    lines = path.read_text().splitlines()
    lines[3] = "9 9 9"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="do not match"):
        lp.read_index_set(path)


def test_index_set_read_rejects_bad_header(tmp_path):
    path = tmp_path / "a.txt"
    path.write_text("3 2\n0 0 0\n")
    with pytest.raises(ValueError, match="header"):
        lp.read_index_set(path)
