"""1D B-spline basis functions on open uniform knot vectors.

Basis functions of degree ``p`` on ``K`` uniform elements of ``[0, 1]`` are
defined by the clamped knot vector with ``p + 1`` repeated knots at each end
and interior knots ``k / K``.  Evaluation uses the two-term recursion with
the ``0/0 := 0`` convention; the last non-empty knot span is treated as
closed so that evaluation at the right endpoint is well defined.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class KnotVector:
    """Open uniform knot vector for degree ``p`` splines on ``K`` elements.

    Attributes
    ----------
    degree : int
        Polynomial degree ``p >= 0``.
    elements : int
        Number of uniform elements ``K >= 1``.
    knots : np.ndarray
        Non-decreasing knot sequence of length ``K + 2p + 1``.
    """

    degree: int
    elements: int
    knots: np.ndarray = field(repr=False)

    @property
    def n_basis(self) -> int:
        """Number of basis functions, ``K + p``."""
        return self.elements + self.degree

    def element_bounds(self, e: int) -> tuple[float, float]:
        """Endpoints of element ``e`` as floats."""
        if not 0 <= e < self.elements:
            raise IndexError(f"element index {e} out of range for K={self.elements}")
        return e / self.elements, (e + 1) / self.elements


@dataclass(frozen=True)
class BasisValues:
    """Values of the ``p + 1`` basis functions supported on one element.

    ``values[r]`` is the value of basis function ``e + r`` at ``point``,
    where ``e`` is the element index.  ``derivatives`` is filled on request.
    """

    element: int
    point: float
    values: np.ndarray
    derivatives: np.ndarray | None = None


def make_knot_vector(K: int, p: int) -> KnotVector:
    """Build the open uniform knot vector for ``K`` elements and degree ``p``.

    Parameters
    ----------
    K : int
        Number of elements, at least 1.
    p : int
        Polynomial degree, at least 0.
    """
    if K < 1:
        raise ValueError(f"element count must be >= 1, got {K}")
    if p < 0:
        raise ValueError(f"degree must be >= 0, got {p}")
    interior = np.arange(1, K) / K
    knots = np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)])
    return KnotVector(degree=p, elements=K, knots=knots)


def eval_basis_order0(kv: KnotVector, i: int, x: float) -> float:
    """Order-0 basis: indicator of the half-open knot span ``[knot_i, knot_{i+1})``.

    At the right end of the patch the last non-empty span is closed, so the
    basis remains a partition of unity at ``x = 1``.
    """
    t = kv.knots
    if not 0 <= i <= len(t) - 2:
        raise IndexError(f"order-0 basis index {i} out of range")
    if t[i] <= x < t[i + 1]:
        return 1.0
    if x == t[-1] and t[i] < t[i + 1] == t[-1]:
        return 1.0
    return 0.0


def eval_basis(kv: KnotVector, i: int, q: int, x: float) -> float:
    """Evaluate basis function ``i`` of order ``q`` at ``x`` by recursion.

    Any recursion term whose knot-difference denominator vanishes is
    defined to contribute zero.
    """
    if not 0 <= q <= kv.degree:
        raise ValueError(f"order {q} outside [0, {kv.degree}]")
    t = kv.knots
    if not 0 <= i <= len(t) - q - 2:
        raise IndexError(f"basis index {i} out of range at order {q}")
    return _cox(t, i, q, x, kv)


def _cox(t: np.ndarray, i: int, q: int, x: float, kv: KnotVector) -> float:
    if q == 0:
        return eval_basis_order0(kv, i, x)
    out = 0.0
    d_left = t[i + q] - t[i]
    if d_left > 0.0:
        out += (x - t[i]) / d_left * _cox(t, i, q - 1, x, kv)
    d_right = t[i + q + 1] - t[i + 1]
    if d_right > 0.0:
        out += (t[i + q + 1] - x) / d_right * _cox(t, i + 1, q - 1, x, kv)
    return out


def _check_point_in_element(kv: KnotVector, e: int, x: float) -> None:
    lo, hi = kv.element_bounds(e)
    if not lo <= x <= hi:
        raise ValueError(f"point {x} outside element {e} = [{lo}, {hi}]")


def eval_nonzero_basis(kv: KnotVector, e: int, x: float) -> BasisValues:
    """Values of the ``p + 1`` basis functions with support on element ``e``.

    These are functions ``e, ..., e + p``; all other basis functions vanish
    on the element.
    """
    _check_point_in_element(kv, e, x)
    p = kv.degree
    values = np.array([eval_basis(kv, e + r, p, x) for r in range(p + 1)])
    return BasisValues(element=e, point=x, values=values)


def eval_nonzero_basis_derivatives(kv: KnotVector, e: int, x: float) -> np.ndarray:
    """First derivatives of the ``p + 1`` supported basis functions.

    Uses the standard degree-reduction formula; terms with a vanishing knot
    difference are dropped.  Requires ``p >= 1``.
    """
    p = kv.degree
    if p < 1:
        raise ValueError("derivatives require degree >= 1")
    _check_point_in_element(kv, e, x)
    t = kv.knots
    out = np.zeros(p + 1)
    for r in range(p + 1):
        i = e + r
        d = 0.0
        d_left = t[i + p] - t[i]
        if d_left > 0.0:
            d += _cox(t, i, p - 1, x, kv) / d_left
        d_right = t[i + p + 1] - t[i + 1]
        if d_right > 0.0:
            d -= _cox(t, i + 1, p - 1, x, kv) / d_right
        out[r] = p * d
    return out


def basis_value_table(kv: KnotVector, e: int, points: np.ndarray) -> np.ndarray:
    """Table ``B[r, n]`` of supported basis values at several points of element ``e``."""
    p = kv.degree
    table = np.empty((p + 1, len(points)))
    for n, x in enumerate(points):
        table[:, n] = eval_nonzero_basis(kv, e, x).values
    return table


def basis_derivative_table(kv: KnotVector, e: int, points: np.ndarray) -> np.ndarray:
    """Table ``B'[r, n]`` of supported basis derivatives at points of element ``e``."""
    table = np.empty((kv.degree + 1, len(points)))
    for n, x in enumerate(points):
        table[:, n] = eval_nonzero_basis_derivatives(kv, e, x)
    return table


def find_element(kv: KnotVector, x: float) -> int:
    """Index of the element containing ``x``; the last element is right-closed."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"point {x} outside [0, 1]")
    return min(int(x * kv.elements), kv.elements - 1)
