"""Linear solvers for the symmetric positive definite scheme matrix.

The direct path factors the matrix once in LAPACK band storage; the
iterative path is plain conjugate gradients and is kept as an independent
cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "BandedFactorization",
    "BandedSymmetricSystem",
    "IndefiniteMatrixError",
    "NonConvergenceError",
    "cg_solve",
    "factor",
    "solve",
]


class IndefiniteMatrixError(np.linalg.LinAlgError):
    """Raised when a band Cholesky pivot is not positive."""


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class BandedSymmetricSystem:
    """Lower band of a symmetric matrix: ``band[k, j] = A[j + k, j]``."""

    band: np.ndarray

    def __post_init__(self) -> None:
        if self.band.ndim != 2:
            raise ValueError("band storage must be two-dimensional")
        if np.any(self.band[0] <= 0):
            raise IndefiniteMatrixError("band matrix has a non-positive diagonal entry")

    @property
    def dimension(self) -> int:
        return self.band.shape[1]

    @property
    def half_bandwidth(self) -> int:
        return self.band.shape[0] - 1

    @classmethod
    def from_matrix(cls, A, half_bandwidth: int | None = None) -> BandedSymmetricSystem:
        """Pack the lower triangle of a dense or sparse symmetric matrix."""
        A = sp.csr_matrix(A) if not sp.issparse(A) else A.tocsr()
        n = A.shape[0]
        if half_bandwidth is None:
            coo = A.tocoo()
            half_bandwidth = int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0
        band = np.zeros((half_bandwidth + 1, n))
        for k in range(half_bandwidth + 1):
            band[k, :n - k] = A.diagonal(-k)
        return cls(band)

    def to_sparse(self) -> sp.csr_matrix:
        n, w = self.dimension, self.half_bandwidth
        diags = [self.band[0]]
        offsets = [0]
        for k in range(1, w + 1):
            diags += [self.band[k, :n - k], self.band[k, :n - k]]
            offsets += [-k, k]
        return sp.diags(diags, offsets, shape=(n, n), format="csr")

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.to_sparse() @ x


@dataclass(frozen=True)
class BandedFactorization:
    factor: np.ndarray  # lower band Cholesky factor in LAPACK layout

    @property
    def dimension(self) -> int:
        return self.factor.shape[1]

    @property
    def pivots(self) -> np.ndarray:
        """Pivots of the equivalent ``L D L^T`` elimination."""
        return self.factor[0] ** 2


def factor(system: BandedSymmetricSystem) -> BandedFactorization:
    try:
        cb = sla.cholesky_banded(system.band, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise IndefiniteMatrixError(
            "band Cholesky hit a non-positive pivot; the matrix is not SPD") from exc
    cb.setflags(write=False)
    return BandedFactorization(cb)


def solve(factorization: BandedFactorization, rhs: np.ndarray) -> np.ndarray:
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape[0] != factorization.dimension:
        raise ValueError(f"rhs has length {rhs.shape[0]}, expected {factorization.dimension}")
    return sla.cho_solve_banded((factorization.factor, True), rhs, check_finite=False)


def cg_solve(system, rhs: np.ndarray, rel_tol: float = 1e-12,
             x0: np.ndarray | None = None) -> np.ndarray:
    """Conjugate gradients to ``||A x - b||_2 <= rel_tol ||b||_2``.

    ``system`` may be a :class:`BandedSymmetricSystem`, a sparse matrix or a
    dense array. The iteration cap is ten times the dimension.
    """
    if not 0.0 < rel_tol <= 1e-6:
        raise ValueError(f"rel_tol must lie in (0, 1e-6], got {rel_tol}")
    A = system.to_sparse() if isinstance(system, BandedSymmetricSystem) else system
    b = np.asarray(rhs, dtype=np.float64)
    n = b.shape[0]
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    # a breakdown on non-SPD input shows up as non-finite iterates
    with np.errstate(divide="ignore", invalid="ignore"):
        x, info = spla.cg(A, b, x0=x0, rtol=rel_tol, atol=0.0, maxiter=10 * n)
        residual = np.linalg.norm(A @ x - b)
    if info != 0 or not residual <= rel_tol * bnorm:
        raise NonConvergenceError(
            f"cg stopped with relative residual {residual / bnorm:.3e} (info={info})")
    return x
