"""Small linear-algebra kernels.

Sparse storage is ``scipy.sparse.csr_matrix``; the Krylov solver and the
Gram-Schmidt routine are implemented here so their contracts (residual
guarantee, explicit failure, drop rule) are under our control.
"""

import warnings

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sps


class SolverError(RuntimeError):
    """Iterative solve did not reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularMatrixError(np.linalg.LinAlgError):
    pass


def sparse_matrix(rows, cols, values, shape):
    """Assemble a CSR matrix, summing duplicate entries."""
    A = sps.coo_matrix((values, (rows, cols)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def is_symmetric(A, rtol=1e-12):
    diff = abs(A - A.T)
    scale = abs(A).max() if A.nnz else 0.0
    return diff.nnz == 0 or diff.max() <= rtol * scale


def cg_solve(A, b, rel_tol=1e-12, max_iter=None, x0=None, return_info=False):
    """Jacobi-preconditioned conjugate gradients.

    Stops once ``||A x - b||_2 <= rel_tol * ||b||_2`` with the residual
    recomputed explicitly; raises :class:`SolverError` otherwise.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"dimension mismatch: {A.shape} vs {b.shape}")
    if max_iter is None:
        max_iter = 10 * n + 100
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0 and x0 is None:
        return (x, 0) if return_info else x
    target = rel_tol * bnorm
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SolverError("non-positive diagonal entry, matrix is not positive definite",
                          residual=np.inf, iterations=0)
    inv_diag = 1.0 / diag

    r = b - A @ x
    z = inv_diag * r
    d = z.copy()
    rz = r @ z
    it = 0
    while it < max_iter:
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            # guard against drift of the recursively updated residual
            true_r = b - A @ x
            if np.linalg.norm(true_r) <= target:
                return (x, it) if return_info else x
            r = true_r
            z = inv_diag * r
            d = z.copy()
            rz = r @ z
        Ad = A @ d
        dAd = d @ Ad
        if dAd <= 0:
            raise SolverError("direction of non-positive curvature, matrix is not positive definite",
                              residual=np.linalg.norm(r) / max(bnorm, 1e-300), iterations=it)
        alpha = rz / dAd
        x += alpha * d
        r -= alpha * Ad
        z = inv_diag * r
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
        it += 1
    res = np.linalg.norm(b - A @ x)
    if res <= target:
        return (x, it) if return_info else x
    raise SolverError(f"CG did not converge in {max_iter} iterations "
                      f"(relative residual {res / bnorm:.3e})",
                      residual=res / bnorm, iterations=it)


def dense_solve(A, b):
    """LU solve with partial pivoting; refuses numerically singular matrices."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} vs {b.shape}")
    scale = np.abs(A).max() if A.size else 0.0
    with warnings.catch_warnings():
        # singularity is reported through the pivot check below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if scale == 0.0 or pivots.min() < 1e-14 * scale:
        raise SingularMatrixError(
            f"matrix is singular to working precision (pivot {pivots.min():.3e}, max entry {scale:.3e})")
    return scipy.linalg.lu_solve((lu, piv), b)


def orthonormalize(vectors, inner_product=None, drop_tol=1e-10, basis=None):
    """Modified Gram-Schmidt with one reorthogonalization pass.

    ``vectors`` are orthonormalized against ``basis`` (already orthonormal) and
    each other. A vector whose norm after projection falls below
    ``drop_tol`` times its original norm is dropped. Returns the list of new
    vectors only.
    """
    if drop_tol <= 0:
        raise ValueError("drop_tol must be positive")

    def dot(u, v):
        return float(u @ v) if inner_product is None else float(u @ (inner_product @ v))

    accepted = list(basis) if basis is not None else []
    start = len(accepted)
    for v in vectors:
        v = np.array(v, dtype=float)
        norm0 = np.sqrt(max(dot(v, v), 0.0))
        if norm0 == 0.0:
            continue
        for _ in range(2):
            for b in accepted:
                v -= dot(b, v) * b
        norm = np.sqrt(max(dot(v, v), 0.0))
        if norm < drop_tol * norm0:
            continue
        accepted.append(v / norm)
    return accepted[start:]


def write_matrix_market(path, A, comment=""):
    scipy.io.mmwrite(str(path), sps.coo_matrix(A), comment=comment, precision=17)
