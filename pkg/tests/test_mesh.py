import numpy as np
import pytest

from igabench.mesh import element_list, gauss_rule, local_index, support_set


def test_element_list_single():
    assert element_list(1) == [(0, 0, 0)]


def test_element_list_k2():
    ids = element_list(2)
    assert len(ids) == 8
    assert ids[0] == (0, 0, 0) and ids[-1] == (1, 1, 1)
    assert ids == sorted(ids)


def test_element_list_k20_count():
    assert len(element_list(20)) == 8000


def test_element_list_rejects_bad_k():
    with pytest.raises(ValueError):
        element_list(0)


def test_support_set_origin_p1():
    s = support_set((0, 0, 0), 1)
    assert len(s) == 8
    assert set(s) == {(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)}


def test_support_set_p0():
    assert support_set((0, 0, 0), 0) == [(0, 0, 0)]


def test_support_set_interior_p2():
    s = support_set((1, 1, 1), 2)
    assert len(s) == 27
    assert set(s) == {(a, b, c) for a in (1, 2, 3) for b in (1, 2, 3) for c in (1, 2, 3)}


def test_local_index_examples():
    assert local_index((0, 0, 0), (0, 0, 0), 1) == 0
    assert local_index((0, 0, 0), (1, 1, 1), 1) == 7
    assert local_index((2, 3, 4), (3, 4, 5), 2) == 13


def test_local_index_bijection():
    for p in (0, 1, 2, 3):
        alpha = (1, 0, 2)
        hits = [local_index(alpha, beta, p) for beta in support_set(alpha, p)]
        assert sorted(hits) == list(range((p + 1) ** 3))


def test_local_index_rejects_outside_support():
    with pytest.raises(ValueError):
        local_index((0, 0, 0), (2, 0, 0), 1)


def test_gauss_rule_p0_is_midpoint():
    rule = gauss_rule(0, 2, (1, 0, 1))
    assert rule.points_per_direction == (1, 1, 1)
    # one-point rule sits at the element midpoints
    assert rule.nodes[0][0] == pytest.approx(0.75)
    assert rule.nodes[1][0] == pytest.approx(0.25)
    # the mapped measure of the rule is the element edge length
    for d in range(3):
        assert rule.weights[d].sum() * (1 / (2 * 2)) == pytest.approx(0.5)


def test_gauss_rule_p1_reference_points():
    # independent oracle: Newton iteration on the degree-2 Legendre polynomial
    x = 0.5
    for _ in range(60):
        x -= (1.5 * x * x - 0.5) / (3.0 * x)
    rule = gauss_rule(1, 1, (0, 0, 0))
    ref = (rule.nodes[0] - 0.5) * 2.0  # map back to [-1, 1]
    assert np.allclose(np.sort(ref), [-x, x], atol=1e-14)
    assert np.allclose(rule.weights[0], [1.0, 1.0])


@pytest.mark.parametrize("p,K", [(0, 1), (1, 2), (2, 3), (4, 2)])
def test_unit_integral(p, K):
    for alpha in [(0, 0, 0), (K - 1, K - 1, K - 1)]:
        rule = gauss_rule(p, K, alpha)
        total = (
            rule.weights[0].sum() * rule.weights[1].sum() * rule.weights[2].sum()
            * rule.jacobian
        )
        assert total == pytest.approx((1 / K) ** 3, rel=1e-13)


@pytest.mark.parametrize("p,K", [(0, 2), (1, 2), (3, 4), (5, 3)])
def test_quadrature_exactness(p, K):
    alpha = (1, 0, K - 1)
    rule = gauss_rule(p, K, alpha)
    for d in range(2 * p + 2):
        for axis in range(3):
            lo = alpha[axis] / K
            hi = (alpha[axis] + 1) / K
            exact = (hi ** (d + 1) - lo ** (d + 1)) / (d + 1)
            approx = (rule.weights[axis] * rule.nodes[axis] ** d).sum() / (2 * K)
            assert approx == pytest.approx(exact, abs=1e-12)


def test_jacobian_constant_across_elements():
    jacs = {gauss_rule(2, 4, alpha).jacobian for alpha in element_list(4)}
    assert jacs == {(1 / 8) ** 3}
