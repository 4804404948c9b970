"""
Linear solves for assembled systems and error norms.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

DENSE_LIMIT = 4000
ITER_TOL = 1e-12


class SolveError(RuntimeError):
    pass


@dataclass
class SolveReport:
    solution: np.ndarray
    method: str
    iterations: int
    relative_residual: float
    converged: bool = True


def _residual(A, u, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ u - b)
    return r / nb if nb > 0 else r


def solve(A, b, method: str | None = None) -> SolveReport:
    """
    Solve ``A u = b``.

    Systems up to ``DENSE_LIMIT`` unknowns use a dense LU factorization with
    partial pivoting; larger ones use ILU-preconditioned BiCGSTAB. `method`
    ('dense-direct' or 'iterative') overrides the choice.

    Raises
    ------
    SolveError
        If the matrix is singular. Iterative non-convergence does not raise;
        the report carries ``converged=False`` and the last iterate.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n, m = A.shape
    if n != m:
        raise SolveError("matrix must be square")
    if b.shape != (n,):
        raise SolveError("right-hand side length does not match the matrix")
    if method is None:
        method = "dense-direct" if n <= DENSE_LIMIT else "iterative"

    if method == "dense-direct":
        dense = A.toarray()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(dense, check_finite=False)
        if np.any(np.diag(lu) == 0.0):
            raise SolveError("singular matrix")
        u = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
        return SolveReport(u, method, 0, _residual(A, u, b))

    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")
    try:
        # natural ordering without pivoting keeps the factor close to ILU(0)
        ilu = spla.spilu(A.tocsc(), drop_tol=0.0, fill_factor=1.0,
                         permc_spec="NATURAL", diag_pivot_thresh=0.0)
    except RuntimeError as exc:
        raise SolveError(f"singular matrix: {exc}") from exc
    M = spla.LinearOperator(A.shape, ilu.solve)
    count = [0]

    def cb(_):
        count[0] += 1

    u, info = spla.bicgstab(A, b, rtol=ITER_TOL, atol=0.0, maxiter=10 * n, M=M, callback=cb)
    res = _residual(A, u, b)
    if info != 0:
        logger.warning("BiCGSTAB stopped after %d iterations, residual %.3e", count[0], res)
    return SolveReport(u, method, count[0], res, converged=info == 0)


def error_norms(numeric, exact) -> tuple[float, float, bool]:
    """
    Return ``(max_abs, rel_l2, relative)``.

    When `exact` is identically zero the second value is the absolute l2
    norm and `relative` is False.
    """
    u = np.asarray(numeric, dtype=float)
    v = np.asarray(exact, dtype=float)
    if u.shape != v.shape:
        raise ValueError("vectors must have equal length")
    e = u - v
    max_abs = float(np.abs(e).max()) if e.size else 0.0
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return max_abs, float(np.linalg.norm(e)), False
    return max_abs, float(np.linalg.norm(e) / nv), True
