"""Assembly of element matrices into the global sparse symmetric Gram matrix.

Scatter is deterministic: element contributions enter the sparse reduction
in lexicographic element order regardless of the order in which the element
matrices were produced, so parallel and serial integrations assemble to
bitwise identical matrices.
"""

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse

from .integrators import ElementMatrix
from .mesh import ElementId, element_list, support_set


def dof_index(beta: tuple[int, int, int], K: int, p: int) -> int:
    """Flat row index of basis multi-index ``beta``: lexicographic over ``(K+p)^3``."""
    n1d = K + p
    for c in beta:
        if not 0 <= c < n1d:
            raise ValueError(f"multi-index {beta} out of range for K={K}, p={p}")
    return (beta[0] * n1d + beta[1]) * n1d + beta[2]


@dataclass(frozen=True)
class GlobalGram:
    """Assembled global Gram matrix in CSR layout with sorted column indices."""

    K: int
    p: int
    n_dofs: int
    matrix: scipy.sparse.csr_matrix

    def spmv(self, x: np.ndarray) -> np.ndarray:
        return spmv(self, x)


def element_dofs(alpha: ElementId, K: int, p: int) -> np.ndarray:
    """Global dof indices of the element's support set, in local-index order."""
    return np.array([dof_index(beta, K, p) for beta in support_set(alpha, p)], dtype=np.int64)


def assemble(elements, K: int, p: int) -> GlobalGram:
    """Assemble one :class:`ElementMatrix` per mesh element into the global matrix.

    Parameters
    ----------
    elements : iterable of (ElementId, ElementMatrix)
        Exactly one entry per element of the ``K^3`` mesh, in any order.
    K, p : int
        Mesh size and degree; validated against the element ids.
    """
    by_id: dict[ElementId, ElementMatrix] = {}
    for alpha, mat in elements:
        if alpha in by_id:
            raise ValueError(f"duplicate element {alpha}")
        by_id[alpha] = mat
    expected = element_list(K)
    if len(by_id) != len(expected) or set(by_id) != set(expected):
        raise ValueError(f"element set does not cover the {K}^3 mesh")

    n = (p + 1) ** 3
    n_dofs = (K + p) ** 3
    n_el = len(expected)
    rows = np.empty(n_el * n * n, dtype=np.int64)
    cols = np.empty(n_el * n * n, dtype=np.int64)
    data = np.empty(n_el * n * n)
    for e, alpha in enumerate(expected):
        mat = by_id[alpha]
        if mat.entries.shape != (n, n):
            raise ValueError(f"element matrix for {alpha} has wrong shape")
        dofs = element_dofs(alpha, K, p)
        sl = slice(e * n * n, (e + 1) * n * n)
        rows[sl] = np.repeat(dofs, n)
        cols[sl] = np.tile(dofs, n)
        data[sl] = mat.entries.ravel()
    coo = scipy.sparse.coo_matrix((data, (rows, cols)), shape=(n_dofs, n_dofs))
    csr = coo.tocsr()
    csr.sort_indices()
    return GlobalGram(K=K, p=p, n_dofs=n_dofs, matrix=csr)


def spmv(gram: GlobalGram, x: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product ``G x``."""
    x = np.asarray(x)
    if x.shape != (gram.n_dofs,):
        raise ValueError(f"vector length {x.shape} does not match {gram.n_dofs} dofs")
    return gram.matrix @ x


def sparsity_row_bound(p: int) -> int:
    """Upper bound ``(2p+1)^3`` on the nonzeros per row of the global Gram."""
    return (2 * p + 1) ** 3


def symbolic_pattern(K: int, p: int) -> scipy.sparse.csr_matrix:
    """Boolean CSR pattern from support overlap, without numeric values."""
    n = (p + 1) ** 3
    ids = element_list(K)
    rows = np.empty(len(ids) * n * n, dtype=np.int64)
    cols = np.empty(len(ids) * n * n, dtype=np.int64)
    for e, alpha in enumerate(ids):
        dofs = element_dofs(alpha, K, p)
        sl = slice(e * n * n, (e + 1) * n * n)
        rows[sl] = np.repeat(dofs, n)
        cols[sl] = np.tile(dofs, n)
    n_dofs = (K + p) ** 3
    pat = scipy.sparse.coo_matrix(
        (np.ones(len(rows), dtype=bool), (rows, cols)), shape=(n_dofs, n_dofs)
    ).tocsr()
    pat.sort_indices()
    return pat


def write_matrix_market(gram: GlobalGram, path) -> None:
    """Write the Gram matrix in symmetric Matrix Market coordinate format."""
    scipy.io.mmwrite(path, gram.matrix.tocoo(), symmetry="symmetric")
