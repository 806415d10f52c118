"""Sparse storage and the two linear-solve capabilities the solver needs.

Both entry points are direct factorizations (SuperLU through scipy) wrapped
with an explicit residual contract: a solve that does not meet its relative
residual raises :class:`SolverFailure` instead of returning silently.
"""

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import SolverFailure

#: Alias for the storage format used throughout: compressed sparse rows.
CompressedMatrix = sparse.csr_matrix


def compressed(A):
    """Normalize a matrix-like input to canonical CSR."""
    A = sparse.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def _factorize(A):
    try:
        return splu(sparse.csc_matrix(A))
    except RuntimeError as exc:  # SuperLU signals singularity this way
        raise SolverFailure(f"factorization failed: {exc}") from exc


def _checked(lu, A, b, tol, label):
    x = lu.solve(b)
    bnorm = np.linalg.norm(b)
    res = np.linalg.norm(A @ x - b)
    if res > tol * max(bnorm, 1e-300):
        x = x + lu.solve(b - A @ x)  # one step of iterative refinement
        res = np.linalg.norm(A @ x - b)
        if res > tol * max(bnorm, 1e-300):
            raise SolverFailure(
                f"{label} solve residual {res:.3e} exceeds {tol:.1e} * |b|",
                residual=res,
            )
    if not np.all(np.isfinite(x)):
        raise SolverFailure(f"{label} solve produced non-finite entries")
    return x


def solve_spd(A, b, tol=1e-12):
    """Solve a symmetric positive definite system to relative residual tol."""
    A = compressed(A)
    return _checked(_factorize(A), A, np.asarray(b, dtype=float), tol, "spd")


def solve_general(A, b, tol=1e-11):
    """Solve a general square nonsingular system to relative residual tol."""
    A = compressed(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    return _checked(_factorize(A), A, np.asarray(b, dtype=float), tol, "general")


class Factorization:
    """Reusable LU factorization with the same residual contract per solve."""

    def __init__(self, A, tol=1e-11):
        self.A = compressed(A)
        self.tol = tol
        self._lu = _factorize(self.A)

    def solve(self, b):
        return _checked(self._lu, self.A, np.asarray(b, dtype=float), self.tol, "factorized")
