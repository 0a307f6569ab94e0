"""
Small dense linear algebra that works over any scalar algebra.

Elimination routines accept lists of dual numbers as well as complex numbers,
pivoting on the modulus of the primal part. Purely numeric helpers (rank,
Hermitian checks, metric Gram-Schmidt) work on numpy arrays.
"""
import logging
from typing import Any, Callable, List, Optional, Sequence

import numpy as np

from core.errors import SingularMatrixError
from core.wirtinger import primal

logger = logging.getLogger(__name__)

Matrix = List[List[Any]]


def _pivot_row(rows: Matrix, col: int) -> int:
    best, best_size = col, -1.0
    for r in range(col, len(rows)):
        size = abs(primal(rows[r][col]))
        if size > best_size:
            best, best_size = r, size
    if best_size == 0.0:
        raise SingularMatrixError(f"Zero pivot in column {col}")
    return best


def _eliminate(rows: Matrix, width: int) -> Matrix:
    """Gauss-Jordan reduction of an augmented matrix with partial pivoting."""
    n = len(rows)
    for col in range(n):
        pivot = _pivot_row(rows, col)
        rows[col], rows[pivot] = rows[pivot], rows[col]
        head = rows[col][col]
        rows[col] = [entry / head for entry in rows[col]]
        for r in range(n):
            if r == col:
                continue
            factor = rows[r][col]
            if primal(factor) == 0 and not hasattr(factor, "tag"):
                continue
            rows[r] = [rows[r][c] - factor * rows[col][c] for c in range(width)]
    return rows


def solve(A: Sequence[Sequence[Any]], b: Sequence[Any]) -> List[Any]:
    """Solve A x = b."""
    n = len(A)
    rows = [list(A[r]) + [b[r]] for r in range(n)]
    reduced = _eliminate(rows, n + 1)
    return [reduced[r][n] for r in range(n)]


def inverse(A: Sequence[Sequence[Any]]) -> Matrix:
    n = len(A)
    rows = [list(A[r]) + [1.0 + 0j if c == r else 0j for c in range(n)] for r in range(n)]
    reduced = _eliminate(rows, 2 * n)
    return [row[n:] for row in reduced]


def transpose(A: Sequence[Sequence[Any]]) -> Matrix:
    return [list(col) for col in zip(*A)]


def matmul(A: Sequence[Sequence[Any]], B: Sequence[Sequence[Any]]) -> Matrix:
    inner = len(B)
    return [[sum((A[i][k] * B[k][j] for k in range(inner)), 0j) for j in range(len(B[0]))]
            for i in range(len(A))]


def matvec(A: Sequence[Sequence[Any]], x: Sequence[Any]) -> List[Any]:
    return [sum((A[i][k] * x[k] for k in range(len(x))), 0j) for i in range(len(A))]


def to_array(A: Sequence[Sequence[Any]]) -> np.ndarray:
    """Primal values as a complex numpy array."""
    return np.array([[complex(primal(x)) for x in row] for row in A], dtype=complex)


# ---------------------------------------------------------------------------
# Numeric helpers
# ---------------------------------------------------------------------------

def rank(matrix: np.ndarray, tol: float = 1e-10) -> int:
    """Rank by column-pivoted elimination with an absolute pivot tolerance."""
    A = np.array(matrix, dtype=complex, copy=True)
    if A.size == 0:
        return 0
    rows, cols = A.shape
    r = 0
    for _ in range(min(rows, cols)):
        norms = np.linalg.norm(A[r:, r:], axis=0)
        j = int(np.argmax(norms))
        if norms[j] <= tol:
            break
        A[:, [r, r + j]] = A[:, [r + j, r]]
        i = r + int(np.argmax(np.abs(A[r:, r])))
        A[[r, i], :] = A[[i, r], :]
        pivot = A[r, r]
        if abs(pivot) <= tol:
            break
        A[r + 1:, :] -= np.outer(A[r + 1:, r] / pivot, A[r, :])
        r += 1
        if r == rows:
            break
    return r


def hermitian_residual(G: np.ndarray) -> float:
    """max |G_ij - conj(G_ji)|."""
    G = np.asarray(G, dtype=complex)
    return float(np.max(np.abs(G - G.conj().T))) if G.size else 0.0


def is_positive_definite(G: np.ndarray) -> bool:
    """Cholesky succeeds exactly for Hermitian positive-definite matrices."""
    H = np.asarray(G, dtype=complex)
    H = 0.5 * (H + H.conj().T)
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return False
    return True


def metric_inner(gram: np.ndarray) -> Callable[[np.ndarray, np.ndarray], complex]:
    """<x, y> = sum_ij gram_ij x_i conj(y_j)."""
    G = np.asarray(gram, dtype=complex)
    return lambda x, y: complex(x @ G @ np.conj(y))


def _project_out(v: np.ndarray, basis: List[np.ndarray], inner) -> np.ndarray:
    # two passes of modified Gram-Schmidt
    for _ in range(2):
        for q in basis:
            v = v - inner(v, q) * q
    return v


def metric_gram_schmidt(fixed: np.ndarray, gram: np.ndarray, count: int,
                        seed_order: Optional[Sequence[int]] = None,
                        pivoting: bool = True, tol: float = 1e-10) -> np.ndarray:
    """
    Orthonormal basis of the metric complement of span(fixed columns).

    Args:
        fixed: dim x k matrix whose columns span the subspace to complement
        gram: Hermitian positive-definite Gram matrix of the inner product
        count: number of complement vectors wanted
        seed_order: order in which standard basis vectors are offered
        pivoting: pick the candidate with the largest residual at each step
        tol: smallest admissible residual norm

    Returns:
        dim x count matrix of complement vectors (columns)
    """
    inner = metric_inner(gram)
    dim = gram.shape[0]
    basis: List[np.ndarray] = []
    for column in np.asarray(fixed, dtype=complex).T:
        v = _project_out(column.copy(), basis, inner)
        norm = np.sqrt(inner(v, v).real)
        if norm <= tol:
            raise SingularMatrixError("Spanning vectors are linearly dependent")
        basis.append(v / norm)

    candidates = list(seed_order) if seed_order is not None else list(range(dim))
    found: List[np.ndarray] = []
    while len(found) < count:
        best, best_norm, best_index = None, -1.0, None
        for index in candidates:
            seed = np.zeros(dim, dtype=complex)
            seed[index] = 1.0
            v = _project_out(seed, basis, inner)
            norm = np.sqrt(max(inner(v, v).real, 0.0))
            if norm > best_norm:
                best, best_norm, best_index = v, norm, index
            if not pivoting and norm > tol:
                break
        if best is None or best_norm <= tol:
            raise SingularMatrixError("Standard basis does not complete the subspace")
        candidates.remove(best_index)
        vector = best / best_norm
        basis.append(vector)
        found.append(vector)
        logger.debug(f"Completion vector from seed e_{best_index + 1} (residual norm {best_norm:.3e})")
    return np.array(found, dtype=complex).T.reshape(dim, count)
