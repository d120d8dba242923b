"""Local Gram matrix integration: classical quadrature loops vs sum factorization.

Both integrators produce the dense ``(p+1)^3 x (p+1)^3`` element matrix of
pairwise L2 products of the supported basis functions.  Only canonical
pairs (row index >= column index) are computed; the mirror is filled
afterwards.  The classical algorithm visits every quadrature point for
every pair, which costs ``O(p^9)`` multiply-adds per element.  Sum
factorization contracts one coordinate axis at a time through two staging
buffers and costs ``O(p^7)``.

The first contraction stage runs over the first coordinate axis and
absorbs the element Jacobian, the second stage over the second axis, and
the final stage over the third axis, matching the buffer equations of the
factorized form.  Each integrator carries an exact multiply-add count in
``ElementMatrix.flops``: ten operations per classical inner statement
(nine multiplies, one accumulate), four per sum-factorization statement
(three multiplies, one accumulate).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .mesh import ElementId, QuadratureRule, gauss_rule
from .splines import KnotVector, basis_value_table


@dataclass(frozen=True)
class ElementMatrix:
    """Dense local Gram contribution of one element.

    ``entries`` is exactly symmetric by construction; ``flops`` counts the
    floating multiply-add operations of the generating algorithm.
    """

    element: ElementId
    n: int
    entries: np.ndarray
    flops: int


@dataclass
class SumFactBuffers:
    """Reusable staging arrays for the sum-factorization integrator.

    ``D`` has shape ``(p+1, p+1, q, q)``: one entry per first-axis function
    pair and remaining quadrature point pair.  ``C`` has shape
    ``(p+1, p+1, p+1, p+1, q)``: one entry per second-axis pair, first-axis
    pair, and remaining third-axis quadrature index.  The integrator zeroes
    both buffers at the start of every element.
    """

    D: np.ndarray
    C: np.ndarray

    @classmethod
    def allocate(cls, p: int, points: int | None = None) -> "SumFactBuffers":
        m = p + 1
        q = m if points is None else points
        return cls(D=np.empty((m, m, q, q)), C=np.empty((m, m, m, m, q)))

    def matches(self, p: int, q: int) -> bool:
        m = p + 1
        return self.D.shape == (m, m, q, q) and self.C.shape == (m, m, m, m, q)


@lru_cache(maxsize=None)
def canonical_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column index arrays of the ``n(n+1)/2`` canonical local pairs."""
    rows = np.concatenate([np.full(i + 1, i, dtype=np.int64) for i in range(n)])
    cols = np.concatenate([np.arange(i + 1, dtype=np.int64) for i in range(n)])
    return rows, cols


@njit(cache=True, nogil=True)
def classical_kernel(bx, by, bz, w1, w2, w3, jac, rows, cols, lo, hi, out):
    """Accumulate canonical pairs ``rows[lo:hi]``/``cols[lo:hi]`` into ``out``.

    Inner statement per (pair, quadrature point): product of six basis
    values, three weights and the Jacobian, accumulated into the entry.
    """
    m = bx.shape[0]
    m2 = m * m
    q1 = bx.shape[1]
    q2 = by.shape[1]
    q3 = bz.shape[1]
    for t in range(lo, hi):
        row = rows[t]
        col = cols[t]
        i1 = row // m2
        i2 = (row // m) % m
        i3 = row % m
        j1 = col // m2
        j2 = (col // m) % m
        j3 = col % m
        acc = 0.0
        for k1 in range(q1):
            for k2 in range(q2):
                for k3 in range(q3):
                    acc += (
                        bx[i1, k1] * bx[j1, k1]
                        * by[i2, k2] * by[j2, k2]
                        * bz[i3, k3] * bz[j3, k3]
                        * w1[k1] * w2[k2] * w3[k3] * jac
                    )
        out[row, col] = acc
        out[col, row] = acc


@njit(cache=True, nogil=True)
def sumfact_kernel(bx, by, bz, w1, w2, w3, jac, D, C, rows, cols, out):
    """Three-stage factorized accumulation into ``out``; buffers must be zeroed."""
    m = bx.shape[0]
    m2 = m * m
    q1 = bx.shape[1]
    q2 = by.shape[1]
    q3 = bz.shape[1]
    # stage 1: contract the first axis, absorbing the Jacobian
    for i1 in range(m):
        for j1 in range(m):
            for k2 in range(q2):
                for k3 in range(q3):
                    for k1 in range(q1):
                        D[i1, j1, k2, k3] += bx[i1, k1] * bx[j1, k1] * w1[k1] * jac
    # stage 2: contract the second axis against the D buffer
    for i2 in range(m):
        for j2 in range(m):
            for i1 in range(m):
                for j1 in range(m):
                    for k3 in range(q3):
                        for k2 in range(q2):
                            C[i2, i1, j2, j1, k3] += (
                                by[i2, k2] * by[j2, k2] * D[i1, j1, k2, k3] * w2[k2]
                            )
    # stage 3: contract the third axis for the canonical pairs only
    for t in range(rows.shape[0]):
        row = rows[t]
        col = cols[t]
        i1 = row // m2
        i2 = (row // m) % m
        i3 = row % m
        j1 = col // m2
        j2 = (col // m) % m
        j3 = col % m
        acc = 0.0
        for k3 in range(q3):
            acc += bz[i3, k3] * bz[j3, k3] * C[i2, i1, j2, j1, k3] * w3[k3]
        out[row, col] = acc
        out[col, row] = acc


def flop_count(method: str, p: int, points: int | None = None) -> int:
    """Exact multiply-add count of one element integration at degree ``p``.

    ``points`` is the quadrature point count per direction (default
    ``p + 1``).  Classical: 10 operations per (canonical pair, point).
    Sum factorization: 4 operations per statement of each of the three
    stages.
    """
    m = p + 1
    q = m if points is None else points
    n = m**3
    pairs = n * (n + 1) // 2
    if method == "classical":
        return pairs * q**3 * 10
    if method == "sumfact":
        return 4 * (m**2 * q**3 + m**4 * q**2 + pairs * q)
    raise ValueError(f"unknown method {method!r}")


def element_tables(
    kv: KnotVector, rule: QuadratureRule, alpha: ElementId
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-direction basis value tables ``B[r, k]`` at the rule's nodes."""
    return tuple(basis_value_table(kv, alpha[d], rule.nodes[d]) for d in range(3))


def _check_inputs(alpha: ElementId, kv: KnotVector, rule: QuadratureRule) -> int:
    q1, q2, q3 = rule.points_per_direction
    if not (q1 == q2 == q3):
        raise ValueError("anisotropic quadrature rules are not supported")
    for d in range(3):
        if not 0 <= alpha[d] < kv.elements:
            raise ValueError(f"element {alpha} outside mesh with K={kv.elements}")
        lo, hi = kv.element_bounds(alpha[d])
        if rule.nodes[d].min() < lo or rule.nodes[d].max() > hi:
            raise ValueError(f"quadrature nodes outside element {alpha}")
    return q1


def integrate_element_classical(
    alpha: ElementId, kv: KnotVector, rule: QuadratureRule
) -> ElementMatrix:
    """Element Gram matrix by the classical quadrature-loop algorithm."""
    q = _check_inputs(alpha, kv, rule)
    p = kv.degree
    n = (p + 1) ** 3
    bx, by, bz = element_tables(kv, rule, alpha)
    rows, cols = canonical_pairs(n)
    out = np.zeros((n, n))
    classical_kernel(
        bx, by, bz, rule.weights[0], rule.weights[1], rule.weights[2],
        rule.jacobian, rows, cols, 0, len(rows), out,
    )
    return ElementMatrix(element=alpha, n=n, entries=out, flops=flop_count("classical", p, q))


def integrate_element_sumfact(
    alpha: ElementId, kv: KnotVector, rule: QuadratureRule, buffers: SumFactBuffers
) -> ElementMatrix:
    """Element Gram matrix by sum factorization, using caller-provided buffers."""
    q = _check_inputs(alpha, kv, rule)
    p = kv.degree
    n = (p + 1) ** 3
    if not buffers.matches(p, q):
        raise ValueError(
            f"buffer shapes {buffers.D.shape}/{buffers.C.shape} do not match p={p}, q={q}"
        )
    bx, by, bz = element_tables(kv, rule, alpha)
    rows, cols = canonical_pairs(n)
    out = np.zeros((n, n))
    buffers.D[:] = 0.0
    buffers.C[:] = 0.0
    sumfact_kernel(
        bx, by, bz, rule.weights[0], rule.weights[1], rule.weights[2],
        rule.jacobian, buffers.D, buffers.C, rows, cols, out,
    )
    return ElementMatrix(element=alpha, n=n, entries=out, flops=flop_count("sumfact", p, q))


def default_rule(kv: KnotVector, alpha: ElementId, points: int | None = None) -> QuadratureRule:
    """Convenience: the Gauss rule for ``alpha`` with an optional point override."""
    rule = gauss_rule(kv.degree, kv.elements, alpha)
    if points is None or points == kv.degree + 1:
        return rule
    ref_nodes, ref_weights = np.polynomial.legendre.leggauss(points)
    h = 1.0 / kv.elements
    nodes = np.empty((3, points))
    weights = np.empty((3, points))
    for d in range(3):
        lo = alpha[d] * h
        nodes[d] = lo + (ref_nodes + 1.0) * (h / 2.0)
        weights[d] = ref_weights
    return QuadratureRule(
        points_per_direction=(points, points, points),
        nodes=nodes,
        weights=weights,
        jacobian=rule.jacobian,
    )
