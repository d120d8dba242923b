import numpy as np
import pytest

from igabench.integrators import (
    SumFactBuffers,
    canonical_pairs,
    element_tables,
    flop_count,
    integrate_element_classical,
    integrate_element_sumfact,
)
from igabench.mesh import element_list, gauss_rule
from igabench.splines import make_knot_vector


def two_method_matrices(K, p, alpha):
    kv = make_knot_vector(K, p)
    rule = gauss_rule(p, K, alpha)
    a = integrate_element_classical(alpha, kv, rule)
    b = integrate_element_sumfact(alpha, kv, rule, SumFactBuffers.allocate(p))
    return a, b


def test_p0_unit_cube_volume():
    a, b = two_method_matrices(1, 0, (0, 0, 0))
    assert a.entries.shape == (1, 1)
    assert a.entries[0, 0] == pytest.approx(1.0, abs=1e-14)
    assert b.entries[0, 0] == pytest.approx(1.0, abs=1e-14)


def test_k1_p1_analytic_mass_matrix():
    # 1D mass matrix of the two hats on [0, 1]: diag 1/3, coupling 1/6
    a, _ = two_method_matrices(1, 1, (0, 0, 0))
    one_d = np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
    expected = np.kron(np.kron(one_d, one_d), one_d)
    assert np.abs(a.entries - expected).max() < 1e-12
    assert a.entries[0, 0] == pytest.approx(1 / 27, abs=1e-12)
    assert a.entries[0, 7] == pytest.approx((1 / 6) ** 3, abs=1e-12)


def test_k2_p1_corner_diagonal():
    a, _ = two_method_matrices(2, 1, (0, 0, 0))
    # on h = 1/2 every supported 1D function has mass h/3 = 1/6 on the element
    assert a.entries[0, 0] == pytest.approx((1 / 6) ** 3, abs=1e-12)


def test_sumfact_equals_classical_entrywise():
    a, b = two_method_matrices(1, 1, (0, 0, 0))
    assert np.abs(a.entries - b.entries).max() < 1e-12


@pytest.mark.parametrize("p", [0, 1, 2, 3])
@pytest.mark.parametrize("K", [1, 2])
def test_oracle_equivalence_small_grid(p, K):
    kv = make_knot_vector(K, p)
    buffers = SumFactBuffers.allocate(p)
    for alpha in element_list(K):
        rule = gauss_rule(p, K, alpha)
        a = integrate_element_classical(alpha, kv, rule).entries
        b = integrate_element_sumfact(alpha, kv, rule, buffers).entries
        assert np.linalg.norm(a - b) / np.linalg.norm(a) <= 1e-10


def test_fine_quadrature_oracle():
    # independent check of the integrand itself: a plain double loop over a
    # richer Gauss rule, written without any of the production kernels
    K, p, alpha = 2, 2, (1, 0, 1)
    kv = make_knot_vector(K, p)
    q = p + 3
    ref_x, ref_w = np.polynomial.legendre.leggauss(q)
    h = 1.0 / K
    tabs, nodes = [], []
    for d in range(3):
        xs = alpha[d] * h + (ref_x + 1.0) * h / 2.0
        from igabench.splines import eval_basis

        tabs.append(np.array([[eval_basis(kv, alpha[d] + r, p, x) for x in xs]
                              for r in range(p + 1)]))
    n = (p + 1) ** 3
    expected = np.zeros((n, n))
    scale = (h / 2.0) ** 3
    for i in range(n):
        for j in range(n):
            i1, i2, i3 = i // 9, (i // 3) % 3, i % 3
            j1, j2, j3 = j // 9, (j // 3) % 3, j % 3
            m1 = (ref_w * tabs[0][i1] * tabs[0][j1]).sum()
            m2 = (ref_w * tabs[1][i2] * tabs[1][j2]).sum()
            m3 = (ref_w * tabs[2][i3] * tabs[2][j3]).sum()
            expected[i, j] = m1 * m2 * m3 * scale
    a = integrate_element_classical(alpha, kv, gauss_rule(p, K, alpha)).entries
    assert np.abs(a - expected).max() < 1e-13


def test_exact_symmetry():
    for K, p in [(2, 1), (2, 2), (3, 3)]:
        a, b = two_method_matrices(K, p, (K - 1, 0, 1 % K))
        assert np.array_equal(a.entries, a.entries.T)
        assert np.array_equal(b.entries, b.entries.T)


def test_positive_diagonal():
    a, b = two_method_matrices(3, 2, (1, 2, 0))
    assert np.all(np.diag(a.entries) > 0)
    assert np.all(np.diag(b.entries) > 0)


def test_element_matrices_translated_in_the_interior():
    # away from the boundary knots the basis repeats under translation, so
    # interior elements share one matrix; boundary elements differ for p >= 2
    K, p = 6, 2
    kv = make_knot_vector(K, p)
    buffers = SumFactBuffers.allocate(p)
    interior = [e for e in range(p, K - p)]
    mats = [
        integrate_element_sumfact((e, e, e), kv, gauss_rule(p, K, (e, e, e)), buffers).entries
        for e in interior
    ]
    for m in mats[1:]:
        assert np.abs(m - mats[0]).max() < 1e-15
    corner = integrate_element_sumfact((0, 0, 0), kv, gauss_rule(p, K, (0, 0, 0)), buffers).entries
    assert np.abs(corner - mats[0]).max() > 1e-6


def test_all_elements_equal_for_p1():
    K, p = 3, 1
    kv = make_knot_vector(K, p)
    ref = None
    for alpha in element_list(K):
        m = integrate_element_classical(alpha, kv, gauss_rule(p, K, alpha)).entries
        if ref is None:
            ref = m
        assert np.abs(m - ref).max() < 1e-15


def test_buffer_shape_mismatch_rejected():
    kv = make_knot_vector(2, 2)
    rule = gauss_rule(2, 2, (0, 0, 0))
    with pytest.raises(ValueError):
        integrate_element_sumfact((0, 0, 0), kv, rule, SumFactBuffers.allocate(1))


def test_inconsistent_inputs_rejected():
    kv = make_knot_vector(2, 2)
    rule = gauss_rule(2, 2, (1, 1, 1))
    with pytest.raises(ValueError):
        integrate_element_classical((0, 0, 0), kv, rule)  # nodes outside element


# ---------------------------------------------------------------------------
# operation counting


def mirror_classical(bx, by, bz, w, jac):
    """Literal Python transcription of the classical loop nest, instrumented."""
    m, q = bx.shape
    n = m**3
    rows, cols = canonical_pairs(n)
    out = np.zeros((n, n))
    statements = 0
    for row, col in zip(rows, cols):
        i1, i2, i3 = row // (m * m), (row // m) % m, row % m
        j1, j2, j3 = col // (m * m), (col // m) % m, col % m
        acc = 0.0
        for k1 in range(q):
            for k2 in range(q):
                for k3 in range(q):
                    acc += (bx[i1, k1] * bx[j1, k1] * by[i2, k2] * by[j2, k2]
                            * bz[i3, k3] * bz[j3, k3] * w[k1] * w[k2] * w[k3] * jac)
                    statements += 1
        out[row, col] = acc
        out[col, row] = acc
    return out, statements


def mirror_sumfact(bx, by, bz, w, jac):
    """Literal Python transcription of the three factorized stages, instrumented."""
    m, q = bx.shape
    n = m**3
    rows, cols = canonical_pairs(n)
    D = np.zeros((m, m, q, q))
    C = np.zeros((m, m, m, m, q))
    out = np.zeros((n, n))
    statements = 0
    for i1 in range(m):
        for j1 in range(m):
            for k2 in range(q):
                for k3 in range(q):
                    for k1 in range(q):
                        D[i1, j1, k2, k3] += bx[i1, k1] * bx[j1, k1] * w[k1] * jac
                        statements += 1
    for i2 in range(m):
        for j2 in range(m):
            for i1 in range(m):
                for j1 in range(m):
                    for k3 in range(q):
                        for k2 in range(q):
                            C[i2, i1, j2, j1, k3] += (by[i2, k2] * by[j2, k2]
                                                      * D[i1, j1, k2, k3] * w[k2])
                            statements += 1
    for row, col in zip(rows, cols):
        i1, i2, i3 = row // (m * m), (row // m) % m, row % m
        j1, j2, j3 = col // (m * m), (col // m) % m, col % m
        acc = 0.0
        for k3 in range(q):
            acc += bz[i3, k3] * bz[j3, k3] * C[i2, i1, j2, j1, k3] * w[k3]
            statements += 1
        out[row, col] = acc
        out[col, row] = acc
    return out, statements


@pytest.mark.parametrize("p", [0, 1])
def test_flop_model_matches_instrumented_mirror(p):
    K = 2
    kv = make_knot_vector(K, p)
    alpha = (1, 0, 1)
    rule = gauss_rule(p, K, alpha)
    bx, by, bz = element_tables(kv, rule, alpha)
    w = rule.weights[0]

    mat_c, stmts_c = mirror_classical(bx, by, bz, w, rule.jacobian)
    assert flop_count("classical", p) == stmts_c * 10
    kernel_c = integrate_element_classical(alpha, kv, rule)
    assert kernel_c.entries.tobytes() == mat_c.tobytes()
    assert kernel_c.flops == flop_count("classical", p)

    mat_s, stmts_s = mirror_sumfact(bx, by, bz, w, rule.jacobian)
    assert flop_count("sumfact", p) == stmts_s * 4
    kernel_s = integrate_element_sumfact(alpha, kv, rule, SumFactBuffers.allocate(p))
    assert kernel_s.entries.tobytes() == mat_s.tobytes()
    assert kernel_s.flops == flop_count("sumfact", p)


def test_classical_count_example_p0():
    assert flop_count("classical", 0) == 10  # one pair, one point, >= 5 multiplies


def test_classical_count_ratio_tends_to_ninth_power():
    for p in (6, 8, 10):
        ratio = flop_count("classical", p) / flop_count("classical", p - 1)
        assert ratio == pytest.approx(((p + 1) / p) ** 9, rel=2e-3)


def test_sumfact_cheaper_and_ratio_at_p9():
    for p in range(1, 10):
        assert flop_count("sumfact", p) < flop_count("classical", p)
    assert flop_count("classical", 9) / flop_count("sumfact", 9) >= 10


def test_sumfact_flops_beat_classical_on_real_element():
    a, b = two_method_matrices(2, 3, (1, 0, 1))
    assert b.flops < a.flops


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        flop_count("magic", 2)
