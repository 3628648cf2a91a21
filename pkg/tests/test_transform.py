"""Forward/inverse transform, evaluation, differentiation, basis change."""
import math

import numpy as np
import pytest

import lpfnt as lp

GRID_P = [0.5, 1.0, 2.0, math.inf]


def setup_interpolation(m, n, p, family="chebyshev_lobatto"):
    A = lp.build_index_set(m, n, p)
    nodes = lp.make_node_system(n, family)
    return A, nodes, nodes.vandermonde(), lp.plan(A)


def newton_basis_value(alpha, x, points):
    val = 1.0
    for d, a in enumerate(alpha):
        for k in range(a):
            val *= x[d] - points[k]
    return val


def brute_evaluate(interp, X):
    """Term-by-term Newton basis summation, independent of the fast path."""
    pts = interp.nodes.points
    rows = interp.A.as_tuples()
    return np.array([sum(c * newton_basis_value(alpha, x, pts)
                         for c, alpha in zip(interp.coeffs, rows)) for x in X])


# ---------------------------------------------------------------------------
# level plan
# ---------------------------------------------------------------------------

def test_plan_example_structure():
    A, nodes, L, lplan = setup_interpolation(3, 2, 1)
    assert lplan.size == 10 and lplan.m == 3
    assert lplan.block_lengths().tolist() == [3, 2, 1, 2, 1, 1]
    assert lplan.block_count_after(1) == 6
    assert lplan.block_count_after(2) == 3
    assert lplan.block_count_after(3) == 1
    assert lplan.merge_group_sizes(2).tolist() == [3, 2, 1]
    assert lplan.merge_group_sizes(3).tolist() == [3]
    with pytest.raises(ValueError):
        lplan.block_count_after(0)
    with pytest.raises(ValueError):
        lplan.merge_group_sizes(1)
    with pytest.raises(ValueError):
        lplan.merge_group_sizes(4)


def test_plan_single_group_case():
    lplan = lp.plan(lp.build_index_set(2, 1, math.inf))
    assert lplan.block_lengths().tolist() == [2, 2]
    assert lplan.block_count_after(2) == 1
    assert lplan.merge_group_sizes(2).tolist() == [2]


def test_plan_univariate():
    lplan = lp.plan(lp.build_index_set(1, 4, 2))
    assert lplan.block_lengths().tolist() == [5]
    assert lplan.block_count_after(1) == 1


def test_merge_groups_match_lower_dimensional_tubes():
    for m in range(2, 5):
        for n in range(1, 5):
            for p in GRID_P:
                lplan = lp.plan(lp.build_index_set(m, n, p))
                for level in range(2, m + 1):
                    lower = lp.build_index_set(m - level + 1, n, p)
                    expected = lp.first_tube_projection(lower)
                    assert lplan.merge_group_sizes(level).tolist() == expected.tolist()


# ---------------------------------------------------------------------------
# forward and inverse transform
# ---------------------------------------------------------------------------

def test_constant_maps_to_delta():
    A, nodes, L, lplan = setup_interpolation(3, 3, 1.5)
    interp = lp.fnt_forward(np.ones(len(A)), lplan, L)
    expected = np.zeros(len(A))
    expected[0] = 1.0
    np.testing.assert_allclose(interp.coeffs, expected, atol=1e-14)


def test_delta_inverse_is_all_ones():
    A, nodes, L, lplan = setup_interpolation(2, 4, 2)
    delta = np.zeros(len(A))
    delta[0] = 1.0
    np.testing.assert_allclose(lp.fnt_inverse(delta, lplan, L), np.ones(len(A)),
                               atol=1e-14)


def test_univariate_transform_is_divided_differences():
    rng = np.random.default_rng(5)
    for n in (1, 4, 9):
        A, nodes, L, lplan = setup_interpolation(1, n, 2)
        samples = rng.standard_normal(n + 1)
        interp = lp.fnt_forward(samples, lplan, L)
        np.testing.assert_allclose(interp.coeffs, lp.triangular_solve(L, samples),
                                   rtol=1e-14, atol=1e-14)
        np.testing.assert_allclose(lp.fnt_inverse(interp.coeffs, lplan, L),
                                   L.matrix @ interp.coeffs, rtol=1e-13, atol=1e-13)


def test_forward_matches_naive_solver():
    rng = np.random.default_rng(17)
    for m in range(1, 4):
        for n in range(1, 5):
            for p in GRID_P:
                A, nodes, L, lplan = setup_interpolation(m, n, p)
                for _ in range(2):
                    samples = rng.standard_normal(len(A))
                    fast = lp.fnt_forward(samples, lplan, L).coeffs
                    slow = lp.naive_solve(samples, A, L).coeffs
                    scale = np.max(np.abs(slow)) or 1.0
                    np.testing.assert_allclose(fast, slow, rtol=0,
                                               atol=1e-10 * scale)


def test_round_trips():
    rng = np.random.default_rng(23)
    for m, n, p in [(2, 5, 1), (3, 4, 2), (4, 3, 0.5), (2, 4, math.inf)]:
        A, nodes, L, lplan = setup_interpolation(m, n, p)
        samples = rng.standard_normal(len(A))
        interp = lp.fnt_forward(samples, lplan, L)
        np.testing.assert_allclose(lp.fnt_inverse(interp.coeffs, lplan, L), samples,
                                   rtol=1e-11, atol=1e-11)
        coeffs = rng.standard_normal(len(A))
        values = lp.fnt_inverse(coeffs, lplan, L)
        np.testing.assert_allclose(lp.fnt_forward(values, lplan, L).coeffs, coeffs,
                                   rtol=1e-11, atol=1e-11)


def test_interpolation_reproduces_samples_on_grid():
    rng = np.random.default_rng(29)
    A, nodes, L, lplan = setup_interpolation(3, 4, 1.5)
    grid = lp.build_grid(A, nodes)
    samples = np.cos(grid @ np.array([1.0, 0.7, -0.4])) + rng.standard_normal(len(A)) * 0.1
    interp = lp.fnt_forward(samples, lplan, L)
    np.testing.assert_allclose(lp.evaluate_batch(interp, grid), samples,
                               rtol=1e-11, atol=1e-11)


def test_polynomials_in_span_are_reproduced_exactly():
    rng = np.random.default_rng(31)
    A, nodes, L, lplan = setup_interpolation(2, 3, 1)
    weights = rng.standard_normal(len(A))
    exponents = A.indices.astype(np.float64)

    def poly(X):
        return np.array([np.dot(weights, np.prod(x ** exponents, axis=1)) for x in X])

    grid = lp.build_grid(A, nodes)
    interp = lp.fnt_forward(poly(grid), lplan, L)
    X = rng.uniform(-1, 1, size=(40, 2))
    np.testing.assert_allclose(lp.evaluate_batch(interp, X), poly(X),
                               rtol=1e-11, atol=1e-11)


def test_forward_validates_sample_shape():
    A, nodes, L, lplan = setup_interpolation(2, 2, 1)
    with pytest.raises(ValueError):
        lp.fnt_forward(np.ones(len(A) + 1), lplan, L)
    with pytest.raises(ValueError):
        lp.fnt_inverse(np.ones(len(A) - 1), lplan, L)


def test_thread_count_does_not_change_bits():
    rng = np.random.default_rng(37)
    A, nodes, L, lplan = setup_interpolation(3, 5, 2)
    samples = rng.standard_normal(len(A))
    serial = lp.fnt_forward(samples, lplan, L, threads=1).coeffs
    parallel = lp.fnt_forward(samples, lplan, L, threads=4).coeffs
    np.testing.assert_array_equal(serial, parallel)
    coeffs = rng.standard_normal(len(A))
    np.testing.assert_array_equal(lp.fnt_inverse(coeffs, lplan, L, threads=1),
                                  lp.fnt_inverse(coeffs, lplan, L, threads=4))


def test_interpolant_caches_plan():
    A, nodes, L, lplan = setup_interpolation(2, 2, 1)
    interp = lp.fnt_forward(np.ones(len(A)), lplan, L)
    assert interp.plan() is interp.plan()


def test_naive_solver_refuses_large_sets():
    A = lp.build_index_set(6, 10, 2)
    assert len(A) > 100_000
    L = lp.make_node_system(10).vandermonde()
    with pytest.raises(ValueError):
        lp.naive_solve(np.zeros(len(A)), A, L)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def test_evaluate_matches_basis_summation():
    rng = np.random.default_rng(41)
    for m, n, p in [(2, 3, 1), (3, 2, 2), (2, 3, math.inf)]:
        A, nodes, L, lplan = setup_interpolation(m, n, p)
        interp = lp.fnt_forward(rng.standard_normal(len(A)), lplan, L)
        X = rng.uniform(-1, 1, size=(25, m))
        np.testing.assert_allclose(lp.evaluate_batch(interp, X),
                                   brute_evaluate(interp, X),
                                   rtol=1e-12, atol=1e-12)


def test_evaluate_single_point_matches_batch():
    rng = np.random.default_rng(43)
    A, nodes, L, lplan = setup_interpolation(2, 4, 2)
    interp = lp.fnt_forward(rng.standard_normal(len(A)), lplan, L)
    x = np.array([0.3, -0.8])
    assert lp.evaluate(interp, x) == lp.evaluate_batch(interp, x[None, :])[0]


def test_evaluate_validates_point_dimension():
    A, nodes, L, lplan = setup_interpolation(2, 2, 1)
    interp = lp.fnt_forward(np.ones(len(A)), lplan, L)
    with pytest.raises(ValueError):
        lp.evaluate_batch(interp, np.zeros((4, 3)))


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------

def test_derivative_matrix_example():
    L = lp.newton_vandermonde(lp.NodeSystem(
        points=np.array([1.0, -1.0, 0.0]), family="chebyshev_lobatto"))
    D = lp.newton_derivative_matrix(L)
    np.testing.assert_allclose(D, [[0.0, 1.0, 2.0],
                                   [0.0, 0.0, 2.0],
                                   [0.0, 0.0, 0.0]], atol=1e-14)


def test_derivative_matrix_strictly_upper():
    D = lp.newton_derivative_matrix(lp.make_node_system(9).vandermonde())
    np.testing.assert_array_equal(np.tril(D), np.zeros_like(D))


def test_differentiate_constant_is_zero():
    A, nodes, L, lplan = setup_interpolation(3, 3, 2)
    interp = lp.fnt_forward(np.ones(len(A)), lplan, L)
    for axis in range(3):
        np.testing.assert_allclose(lp.differentiate(interp, axis).coeffs,
                                   np.zeros(len(A)), atol=1e-13)


def test_differentiate_quadratic():
    A, nodes, L, lplan = setup_interpolation(2, 3, 2)
    grid = lp.build_grid(A, nodes)
    interp = lp.fnt_forward(grid[:, 0] ** 2, lplan, L)
    dx = lp.differentiate(interp, 0)
    X = np.random.default_rng(47).uniform(-1, 1, size=(30, 2))
    np.testing.assert_allclose(lp.evaluate_batch(dx, X), 2 * X[:, 0],
                               rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(lp.evaluate_batch(lp.differentiate(interp, 1), X),
                               np.zeros(30), atol=1e-12)


def test_mixed_partials_commute():
    rng = np.random.default_rng(53)
    A, nodes, L, lplan = setup_interpolation(3, 5, 2)
    grid = lp.build_grid(A, nodes)
    samples = np.exp(0.4 * grid[:, 0] - 0.3 * grid[:, 1]) * np.sin(grid[:, 2])
    interp = lp.fnt_forward(samples, lplan, L)
    d01 = lp.differentiate(lp.differentiate(interp, 0), 1)
    d10 = lp.differentiate(lp.differentiate(interp, 1), 0)
    np.testing.assert_allclose(d01.coeffs, d10.coeffs, rtol=1e-9, atol=1e-9)


def test_gradient_matches_finite_differences():
    A, nodes, L, lplan = setup_interpolation(3, 8, 2)
    grid = lp.build_grid(A, nodes)
    samples = np.cos(grid @ np.array([0.9, -0.5, 0.3])) * np.exp(0.2 * grid[:, 1])
    interp = lp.fnt_forward(samples, lplan, L)
    grads = [lp.differentiate(interp, axis) for axis in range(3)]
    rng = np.random.default_rng(59)
    X = rng.uniform(-0.9, 0.9, size=(20, 3))
    step = 1e-5
    for axis in range(3):
        shift = np.zeros(3)
        shift[axis] = step
        fd = (lp.evaluate_batch(interp, X + shift)
              - lp.evaluate_batch(interp, X - shift)) / (2 * step)
        np.testing.assert_allclose(lp.evaluate_batch(grads[axis], X), fd, atol=1e-6)


def test_differentiate_validates_axis():
    A, nodes, L, lplan = setup_interpolation(2, 2, 1)
    interp = lp.fnt_forward(np.ones(len(A)), lplan, L)
    with pytest.raises(ValueError):
        lp.differentiate(interp, 2)


# ---------------------------------------------------------------------------
# orthonormal basis change
# ---------------------------------------------------------------------------

def tensor_quadrature(m, count):
    x, w = lp.gauss_legendre(count)
    X = np.stack([g.ravel() for g in np.meshgrid(*([x] * m), indexing="ij")], axis=1)
    W = np.ones(X.shape[0])
    for g in np.meshgrid(*([w] * m), indexing="ij"):
        W = W * g.ravel()
    return X, W / 2.0 ** m


def test_orthonormal_matrix_upper_triangular():
    Q = lp.newton_to_orthonormal_matrix(lp.make_node_system(7).vandermonde())
    np.testing.assert_array_equal(np.tril(Q, -1), np.zeros_like(Q))


def test_to_orthonormal_constant():
    A, nodes, L, lplan = setup_interpolation(3, 2, 1)
    interp = lp.fnt_forward(np.ones(len(A)), lplan, L)
    a = lp.to_orthonormal(interp)
    expected = np.zeros(len(A))
    expected[0] = 1.0
    np.testing.assert_allclose(a, expected, atol=1e-14)


def test_to_orthonormal_linear():
    # x = phi_1 / sqrt(3) in the orthonormal uniform-measure basis
    A, nodes, L, lplan = setup_interpolation(1, 1, 1)
    grid = lp.build_grid(A, nodes)
    interp = lp.fnt_forward(grid[:, 0], lplan, L)
    np.testing.assert_allclose(lp.to_orthonormal(interp), [0.0, 1 / math.sqrt(3)],
                               rtol=1e-14, atol=1e-15)


def test_parseval_identity():
    rng = np.random.default_rng(61)
    for m, n, p in [(1, 5, 1), (2, 4, 2), (3, 3, 1)]:
        A, nodes, L, lplan = setup_interpolation(m, n, p)
        interp = lp.fnt_forward(rng.standard_normal(len(A)), lplan, L)
        a = lp.to_orthonormal(interp)
        X, W = tensor_quadrature(m, n + 1)
        values = lp.evaluate_batch(interp, X)
        assert abs(np.dot(W, values ** 2) - np.dot(a, a)) <= 1e-10


def test_orthonormal_inner_product_matches_quadrature():
    rng = np.random.default_rng(67)
    A, nodes, L, lplan = setup_interpolation(2, 4, 1.5)
    f = lp.fnt_forward(rng.standard_normal(len(A)), lplan, L)
    g = lp.fnt_forward(rng.standard_normal(len(A)), lplan, L)
    X, W = tensor_quadrature(2, 5)
    quad = np.dot(W, lp.evaluate_batch(f, X) * lp.evaluate_batch(g, X))
    assert abs(np.dot(lp.to_orthonormal(f), lp.to_orthonormal(g)) - quad) <= 1e-10


# ---------------------------------------------------------------------------
# operation counting
# ---------------------------------------------------------------------------

def test_op_counter_matches_plan_prediction():
    rng = np.random.default_rng(71)
    for m, n, p in [(2, 4, 1), (3, 3, 2), (2, 3, math.inf)]:
        A, nodes, L, lplan = setup_interpolation(m, n, p)
        fwd = lp.OpCounter()
        lp.fnt_forward(rng.standard_normal(len(A)), lplan, L, counter=fwd)
        assert fwd.madds == lplan.forward_op_count()
        inv = lp.OpCounter()
        lp.fnt_inverse(rng.standard_normal(len(A)), lplan, L, counter=inv)
        assert inv.madds == fwd.madds


def test_op_count_within_complexity_envelope():
    for m in range(1, 5):
        for n in range(1, 6):
            for p in GRID_P:
                A = lp.build_index_set(m, n, p)
                lplan = lp.plan(A)
                assert lplan.forward_op_count() <= 4 * len(A) * m * (n + 1)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_coefficient_csv_round_trip(tmp_path):
    rng = np.random.default_rng(73)
    A, nodes, L, lplan = setup_interpolation(3, 3, 1)
    interp = lp.fnt_forward(rng.standard_normal(len(A)), lplan, L)
    path = tmp_path / "coeffs.csv"
    lp.write_coefficients_csv(interp, path)
    np.testing.assert_array_equal(lp.read_coefficients_csv(path, A), interp.coeffs)
    header = path.read_text().splitlines()[0]
    assert header == "alpha_1,alpha_2,alpha_3,value"


def test_coefficient_csv_validates_index_column(tmp_path):
    A, nodes, L, lplan = setup_interpolation(2, 2, 1)
    interp = lp.fnt_forward(np.ones(len(A)), lplan, L)
    path = tmp_path / "coeffs.csv"
    lp.write_coefficients_csv(interp, path)
    with pytest.raises(ValueError, match="does not match"):
        lp.read_coefficients_csv(path, lp.build_index_set(2, 3, 1))


def test_coefficient_binary_round_trip(tmp_path):
    rng = np.random.default_rng(79)
    A, nodes, L, lplan = setup_interpolation(2, 4, 0.5)
    interp = lp.fnt_forward(rng.standard_normal(len(A)), lplan, L)
    path = tmp_path / "coeffs.fnt"
    lp.write_coefficients_binary(interp, path)
    m, n, p, coeffs = lp.read_coefficients_binary(path)
    assert (m, n, float(p)) == (2, 4, 0.5)
    np.testing.assert_array_equal(coeffs, interp.coeffs)


def test_coefficient_binary_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.fnt"
    path.write_bytes(b"NOPE" + bytes(24))
    with pytest.raises(ValueError, match="magic"):
        lp.read_coefficients_binary(path)


def test_coefficient_binary_rejects_truncation(tmp_path):
    A, nodes, L, lplan = setup_interpolation(2, 2, 1)
    interp = lp.fnt_forward(np.ones(len(A)), lplan, L)
    path = tmp_path / "coeffs.fnt"
    lp.write_coefficients_binary(interp, path)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(ValueError, match="truncated"):
        lp.read_coefficients_binary(path)
