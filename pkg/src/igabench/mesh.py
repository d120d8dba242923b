"""Tensor-product mesh enumeration, support sets and Gauss quadrature.

The domain ``(0,1)^3`` is split into ``K^3`` cubes.  An element id is a
triple of 1D element indices; the ``(p+1)^3`` basis functions supported on
element ``(i,j,k)`` carry the multi-indices ``{i..i+p} x {j..j+p} x {k..k+p}``.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

ElementId = tuple[int, int, int]


def element_list(K: int) -> list[ElementId]:
    """All ``K^3`` element ids in lexicographic order."""
    if K < 1:
        raise ValueError(f"mesh size must be >= 1, got {K}")
    return list(product(range(K), repeat=3))


def support_set(alpha: ElementId, p: int) -> list[tuple[int, int, int]]:
    """Multi-indices of the ``(p+1)^3`` basis functions supported on ``alpha``.

    Ordered lexicographically, consistent with :func:`local_index`.
    """
    i, j, k = alpha
    return [
        (i + a, j + b, k + c)
        for a in range(p + 1)
        for b in range(p + 1)
        for c in range(p + 1)
    ]


def local_index(alpha: ElementId, beta: tuple[int, int, int], p: int) -> int:
    """Position of basis multi-index ``beta`` within the local element matrix.

    A bijection from the support set of ``alpha`` onto ``0 .. (p+1)^3 - 1``,
    lexicographic in the per-direction offsets.
    """
    m = p + 1
    offsets = tuple(b - a for a, b in zip(alpha, beta))
    for off in offsets:
        if not 0 <= off <= p:
            raise ValueError(f"multi-index {beta} not supported on element {alpha}")
    return offsets[0] * m * m + offsets[1] * m + offsets[2]


@dataclass(frozen=True)
class QuadratureRule:
    """Per-element Gauss-Legendre rule for a uniform mesh.

    ``nodes[d]`` holds the abscissae mapped into the element along direction
    ``d``; ``weights[d]`` holds the reference weights on ``[-1, 1]`` (their
    sum is 2; multiplied by the per-direction map factor ``1/(2K)`` they sum
    to the element edge length).  ``jacobian`` is the constant determinant
    ``(1/(2K))^3`` of the affine map from the reference cube ``[-1, 1]^3``.
    """

    points_per_direction: tuple[int, int, int]
    nodes: np.ndarray  # shape (3, q)
    weights: np.ndarray  # shape (3, q)
    jacobian: float

    @property
    def total_points(self) -> int:
        p1, p2, p3 = self.points_per_direction
        return p1 * p2 * p3


def gauss_rule(p: int, K: int, alpha: ElementId) -> QuadratureRule:
    """Gauss-Legendre rule with ``p + 1`` points per direction on element ``alpha``.

    Exact for per-direction polynomial degree up to ``2p + 1``, which covers
    the degree ``2p`` products appearing in the Gram matrix.
    """
    if p < 0:
        raise ValueError(f"degree must be >= 0, got {p}")
    q = p + 1
    ref_nodes, ref_weights = np.polynomial.legendre.leggauss(q)
    h = 1.0 / K
    nodes = np.empty((3, q))
    weights = np.empty((3, q))
    for d in range(3):
        lo = alpha[d] * h
        nodes[d] = lo + (ref_nodes + 1.0) * (h / 2.0)
        weights[d] = ref_weights
    jac = (1.0 / (2.0 * K)) ** 3
    return QuadratureRule(
        points_per_direction=(q, q, q), nodes=nodes, weights=weights, jacobian=jac
    )
