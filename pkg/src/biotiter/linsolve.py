"""Sparse direct solves of the block systems (SuperLU with partial pivoting)."""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, row: int | None, detail: str = ""):
        where = f" at pivot row {row}" if row is not None else ""
        super().__init__(f"singular matrix{where}{': ' + detail if detail else ''}")
        self.row = row


#: number of factorizations performed, for tests that assert matrix reuse
FACTOR_COUNT = 0


class Factorization:
    """LU factors of a square sparse matrix, reusable across right-hand sides."""

    def __init__(self, A):
        global FACTOR_COUNT
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        self.shape = A.shape
        self._A = A
        try:
            self._lu = spla.splu(A, permc_spec="COLAMD", diag_pivot_thresh=1.0)
        except RuntimeError as exc:
            raise SingularMatrixError(_first_singular_row(A), str(exc)) from None
        diagU = self._lu.U.diagonal()
        if not np.all(np.isfinite(diagU)) or np.any(diagU == 0):
            raise SingularMatrixError(_first_singular_row(A), "zero pivot")
        FACTOR_COUNT += 1

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.shape[0]:
            raise ValueError("right-hand side has the wrong length")
        return self._lu.solve(b)

    def condest(self) -> float:
        """1-norm condition number estimate."""
        n = self.shape[0]
        inv = spla.LinearOperator(
            (n, n), matvec=self._lu.solve, rmatvec=lambda x: self._lu.solve(x, trans="T"), dtype=float
        )
        return float(spla.onenormest(self._A) * spla.onenormest(inv))


def _first_singular_row(A) -> int | None:
    A = sp.csr_matrix(A)
    empty = np.flatnonzero(np.diff(A.indptr) == 0)
    if empty.size:
        return int(empty[0])
    if A.shape[0] > 4000:
        return None
    P, L, U = sla.lu(A.toarray())
    d = np.abs(np.diag(U))
    scale = max(float(np.max(d)), 1.0)
    bad = np.flatnonzero(d <= 1e-14 * scale)
    if not bad.size:
        return None
    # row of A that landed in the failing pivot position
    return int(np.argmax(P[:, bad[0]]))


def lu_factor(A) -> Factorization:
    return Factorization(A)


def solve(fact: Factorization, b: np.ndarray) -> np.ndarray:
    return fact.solve(b)


def spsolve(A, b) -> np.ndarray:
    return Factorization(A).solve(b)
