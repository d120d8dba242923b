import numpy as np
import pytest

from igabench.splines import (
    eval_basis,
    eval_basis_order0,
    eval_nonzero_basis,
    eval_nonzero_basis_derivatives,
    find_element,
    make_knot_vector,
)


def test_knot_vector_p0_single_element():
    kv = make_knot_vector(1, 0)
    assert np.array_equal(kv.knots, [0.0, 1.0])


def test_knot_vector_k2_p1():
    kv = make_knot_vector(2, 1)
    assert np.allclose(kv.knots, [0, 0, 0.5, 1, 1])


def test_knot_vector_k2_p2():
    kv = make_knot_vector(2, 2)
    assert np.allclose(kv.knots, [0, 0, 0, 0.5, 1, 1, 1])


@pytest.mark.parametrize("K,p", [(1, 0), (2, 1), (4, 3), (8, 5)])
def test_knot_vector_structure(K, p):
    kv = make_knot_vector(K, p)
    t = kv.knots
    assert len(t) == K + 2 * p + 1
    assert kv.n_basis == K + p
    assert np.all(np.diff(t) >= 0)
    assert np.all(t[: p + 1] == 0.0) and np.all(t[-(p + 1):] == 1.0)


def test_knot_vector_rejects_bad_sizes():
    with pytest.raises(ValueError):
        make_knot_vector(0, 1)
    with pytest.raises(ValueError):
        make_knot_vector(2, -1)


def test_order0_span_membership():
    kv = make_knot_vector(2, 1)
    assert eval_basis_order0(kv, 1, 0.25) == 1.0
    assert eval_basis_order0(kv, 1, 0.75) == 0.0


def test_order0_closed_right_endpoint():
    kv = make_knot_vector(1, 0)
    assert eval_basis_order0(kv, 0, 1.0) == 1.0


def test_order0_index_range():
    kv = make_knot_vector(2, 1)
    with pytest.raises(IndexError):
        eval_basis_order0(kv, 4, 0.5)


def test_hat_function_values():
    kv = make_knot_vector(2, 1)
    assert eval_basis(kv, 1, 1, 0.25) == pytest.approx(0.5)
    assert eval_basis(kv, 1, 1, 0.5) == pytest.approx(1.0)


def test_eval_basis_rejects_bad_order_and_index():
    kv = make_knot_vector(2, 2)
    with pytest.raises(ValueError):
        eval_basis(kv, 0, 3, 0.5)
    with pytest.raises(IndexError):
        eval_basis(kv, 10, 2, 0.5)


def test_nonzero_basis_linear_hats():
    kv = make_knot_vector(2, 1)
    bv = eval_nonzero_basis(kv, 0, 0.25)
    assert np.allclose(bv.values, [0.5, 0.5])


def test_nonzero_basis_interpolatory_at_boundary():
    kv = make_knot_vector(2, 1)
    assert np.allclose(eval_nonzero_basis(kv, 0, 0.0).values, [1.0, 0.0])


def test_nonzero_basis_agrees_with_eval_basis():
    kv = make_knot_vector(4, 2)
    for e, x in [(0, 0.1), (1, 0.3), (3, 0.99)]:
        bv = eval_nonzero_basis(kv, e, x)
        expected = [eval_basis(kv, e + r, 2, x) for r in range(3)]
        assert np.allclose(bv.values, expected, atol=1e-15)
        assert bv.values.sum() == pytest.approx(1.0, abs=1e-12)


def test_nonzero_basis_rejects_point_outside_element():
    kv = make_knot_vector(4, 2)
    with pytest.raises(ValueError):
        eval_nonzero_basis(kv, 0, 0.9)


def test_hat_derivatives():
    kv = make_knot_vector(2, 1)
    for x in (0.1, 0.25, 0.4):
        assert np.allclose(eval_nonzero_basis_derivatives(kv, 0, x), [-2.0, 2.0])


def test_derivatives_sum_to_zero():
    rng = np.random.default_rng(7)
    for K, p in [(2, 1), (3, 2), (5, 4)]:
        kv = make_knot_vector(K, p)
        for _ in range(5):
            e = rng.integers(K)
            x = (e + rng.random()) / K
            assert abs(eval_nonzero_basis_derivatives(kv, e, x).sum()) < 1e-10


def test_derivatives_rejected_for_p0():
    kv = make_knot_vector(2, 0)
    with pytest.raises(ValueError):
        eval_nonzero_basis_derivatives(kv, 0, 0.25)


def test_derivative_matches_finite_difference_at_midpoint():
    kv = make_knot_vector(4, 2)
    e = 1
    x = (e + 0.5) / 4
    h = 1e-6
    ana = eval_nonzero_basis_derivatives(kv, e, x)
    fd = (eval_nonzero_basis(kv, e, x + h).values - eval_nonzero_basis(kv, e, x - h).values) / (2 * h)
    assert np.allclose(ana, fd, atol=1e-6)


# properties over the sampled grid


def test_partition_of_unity_and_nonnegativity():
    grid = np.linspace(0.0, 1.0, 101)
    for p in range(6):
        for K in range(1, 9):
            kv = make_knot_vector(K, p)
            for x in grid:
                vals = [eval_basis(kv, i, p, x) for i in range(kv.n_basis)]
                assert min(vals) >= 0.0
                assert abs(sum(vals) - 1.0) < 1e-12


def test_local_support():
    rng = np.random.default_rng(3)
    for K, p in [(4, 2), (6, 3)]:
        kv = make_knot_vector(K, p)
        t = kv.knots
        for _ in range(50):
            i = rng.integers(kv.n_basis)
            x = rng.random()
            if not (t[i] <= x <= t[i + p + 1]):
                assert eval_basis(kv, i, p, x) == 0.0


def test_endpoint_interpolation():
    for K, p in [(1, 0), (2, 1), (4, 3)]:
        kv = make_knot_vector(K, p)
        at0 = [eval_basis(kv, i, p, 0.0) for i in range(kv.n_basis)]
        at1 = [eval_basis(kv, i, p, 1.0) for i in range(kv.n_basis)]
        assert at0[0] == pytest.approx(1.0) and max(at0[1:]) == 0.0
        assert at1[-1] == pytest.approx(1.0) and max(at1[:-1]) == 0.0


def test_derivative_finite_difference_consistency():
    rng = np.random.default_rng(11)
    h = 1e-6
    for K, p in [(2, 1), (4, 2), (5, 3)]:
        kv = make_knot_vector(K, p)
        for _ in range(10):
            e = int(rng.integers(K))
            x = (e + 0.2 + 0.6 * rng.random()) / K
            ana = eval_nonzero_basis_derivatives(kv, e, x)
            fd = (
                eval_nonzero_basis(kv, e, x + h).values
                - eval_nonzero_basis(kv, e, x - h).values
            ) / (2 * h)
            scale = max(1.0, np.abs(ana).max())
            assert np.abs(ana - fd).max() / scale < 1e-5


def test_find_element():
    kv = make_knot_vector(4, 2)
    assert find_element(kv, 0.0) == 0
    assert find_element(kv, 0.26) == 1
    assert find_element(kv, 1.0) == 3
    with pytest.raises(ValueError):
        find_element(kv, 1.5)
