"""SPD solves: banded Cholesky for tridiagonal systems, Jacobi-PCG otherwise.

The tridiagonal path uses LAPACK's square-root-free banded Cholesky
(``pttrf``/``pttrs``, A = L D Lᵀ), which is what the time stepper hits on
every step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.lapack import dpttrf as _pttrf, dpttrs as _pttrs
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import MaxIterations, NotSpd
from .fem import Banded


@dataclass(frozen=True, eq=False)
class SpdSolver:
    n: int
    tolerance: float
    max_iterations: int
    cholesky: tuple | None = None  # (D, L subdiagonal) from pttrf
    matrix: sp.csr_matrix | None = None
    precond: np.ndarray | None = None

    @property
    def direct(self) -> bool:
        return self.cholesky is not None

    def solve(self, b):
        return solve(self, b)


def _check_symmetric(A: sp.spmatrix):
    scale = abs(A).max() if A.nnz else 0.0
    asym = abs(A - A.T).max() if A.nnz else 0.0
    if asym > 1e-12 * scale:
        raise NotSpd(f"matrix is not symmetric (max asymmetry {asym:.3e})")


def factorize(A, tolerance: float = 1e-12, max_iterations: int = 10_000) -> SpdSolver:
    """Prepare a reusable solver for the SPD matrix ``A``.

    Tridiagonal input (or a :class:`~ppblowup.fem.Banded`) is factored by
    LAPACK banded Cholesky; anything else goes through Jacobi-preconditioned
    conjugate gradients.
    """
    if isinstance(A, Banded):
        diag, off = A.diag, A.off
    else:
        A = sp.csr_matrix(A, dtype=float)
        if A.shape[0] != A.shape[1]:
            raise NotSpd("matrix is not square")
        _check_symmetric(A)
        coo = A.tocoo()
        if coo.nnz and np.max(np.abs(coo.row - coo.col)) > 1:
            d = A.diagonal()
            if np.any(d <= 0):
                raise NotSpd("nonpositive diagonal entry")
            return SpdSolver(A.shape[0], tolerance, max_iterations, matrix=A, precond=1.0 / d)
        diag = A.diagonal()
        off = A.diagonal(1) if A.shape[0] > 1 else np.zeros(0)
    D, E, info = _pttrf(np.asarray(diag, dtype=float), np.asarray(off, dtype=float))
    if info != 0:
        raise NotSpd(f"nonpositive pivot at row {info} in banded Cholesky")
    return SpdSolver(diag.size, tolerance, max_iterations, cholesky=(D, E))


def solve(solver: SpdSolver, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (solver.n,):
        raise ValueError(f"rhs has shape {b.shape}, expected ({solver.n},)")
    if solver.direct:
        x, info = _pttrs(*solver.cholesky, b)
        if info != 0:
            raise ValueError(f"pttrs failed with info={info}")
        return x
    P = spla.LinearOperator((solver.n, solver.n), matvec=lambda x: solver.precond * x)
    x, info = spla.cg(
        solver.matrix, b, rtol=solver.tolerance, atol=0.0, maxiter=solver.max_iterations, M=P
    )
    if info > 0:
        raise MaxIterations(f"CG stopped after {info} iterations")
    return x
