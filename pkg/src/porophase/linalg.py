"""Banded matrices, banded solves, and the structural diagnostics used by
the scheme's solvability argument (diagonal dominance, irreducibility,
entrywise nonnegativity)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, pivot_index: int):
        self.pivot_index = pivot_index
        super().__init__(f"zero pivot encountered at index {pivot_index}")


@dataclass
class BandedMatrix:
    """Square banded matrix in LAPACK band storage.

    data[upper + i - j, j] holds entry (i, j) for j - upper <= i <= j + lower.
    """

    n: int
    lower: int
    upper: int
    data: np.ndarray   # shape (lower + upper + 1, n)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.lower >= self.n or self.upper >= self.n:
            raise ValueError("bandwidths must be smaller than the dimension")
        if self.data.shape != (self.lower + self.upper + 1, self.n):
            raise ValueError(f"band storage must have shape "
                             f"({self.lower + self.upper + 1}, {self.n})")

    @classmethod
    def zeros(cls, n: int, lower: int, upper: int) -> "BandedMatrix":
        return cls(n, lower, upper, np.zeros((lower + upper + 1, n)))

    @classmethod
    def from_dense(cls, A: np.ndarray, lower: int, upper: int) -> "BandedMatrix":
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        out = cls.zeros(n, lower, upper)
        for i in range(n):
            for j in range(max(0, i - lower), min(n, i + upper + 1)):
                out.data[upper + i - j, j] = A[i, j]
        # reject entries outside the declared band
        mask = np.ones_like(A, dtype=bool)
        for i in range(n):
            mask[i, max(0, i - lower):min(n, i + upper + 1)] = False
        if np.any(A[mask] != 0):
            raise ValueError("dense matrix has entries outside the declared band")
        return out

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for j in range(self.n):
            for d in range(self.lower + self.upper + 1):
                i = d - self.upper + j
                if 0 <= i < self.n:
                    A[i, j] = self.data[d, j]
        return A

    def __getitem__(self, ij) -> float:
        i, j = ij
        if j - self.upper <= i <= j + self.lower:
            return float(self.data[self.upper + i - j, j])
        return 0.0

    def __setitem__(self, ij, v: float) -> None:
        i, j = ij
        if not (j - self.upper <= i <= j + self.lower):
            raise IndexError(f"entry ({i},{j}) lies outside the band")
        self.data[self.upper + i - j, j] = v

    def add(self, i: int, j: int, v: float) -> None:
        self.data[self.upper + i - j, j] += v

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.zeros(self.n)
        for d in range(self.lower + self.upper + 1):
            off = d - self.upper   # row - col
            diag = np.array([self.data[d, j] for j in range(self.n)
                             if 0 <= d - self.upper + j < self.n])
            if off >= 0:
                y[off:] += diag * x[:self.n - off]
            else:
                y[:off] += diag * x[-off:]
        return y

    def row_abs_offdiag_sums(self) -> np.ndarray:
        sums = np.zeros(self.n)
        for j in range(self.n):
            for d in range(self.lower + self.upper + 1):
                i = d - self.upper + j
                if 0 <= i < self.n and i != j:
                    sums[i] += abs(self.data[d, j])
        return sums

    def diagonal(self) -> np.ndarray:
        return self.data[self.upper].copy()


def solve_banded(A: BandedMatrix, rhs: np.ndarray) -> np.ndarray:
    """Solve A x = rhs; raises SingularMatrixError with the pivot index.

    Delegates to LAPACK's banded LU; the returned solution is checked
    against the backward-stable residual bound.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (A.n,):
        raise ValueError(f"rhs has length {rhs.shape}, expected ({A.n},)")
    try:
        x = scipy.linalg.solve_banded((A.lower, A.upper), A.data, rhs)
    except scipy.linalg.LinAlgError as exc:
        pivot = _first_zero_pivot(A)
        raise SingularMatrixError(pivot) from exc
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError(_first_zero_pivot(A))
    resid = np.abs(A.matvec(x) - rhs).max()
    a_inf = (np.abs(A.diagonal()) + A.row_abs_offdiag_sums()).max()
    bound = 1e-10 * (a_inf * np.abs(x).max() + np.abs(rhs).max())
    if resid > max(bound, 1e-300):
        raise SingularMatrixError(_first_zero_pivot(A))
    return x


def _first_zero_pivot(A: BandedMatrix) -> int:
    """Index of the first vanishing pivot of the unpivoted LU, best effort."""
    dense = A.to_dense()
    n = A.n
    for k in range(n):
        if abs(dense[k, k]) < 1e-300:
            return k
        dense[k + 1:, k + 1:] -= np.outer(dense[k + 1:, k], dense[k, k + 1:]) / dense[k, k]
    return n - 1


@dataclass(frozen=True)
class DominanceReport:
    ok: bool
    margins: np.ndarray   # |A_kk| - sum_{l != k} |A_kl| per row

    def __bool__(self) -> bool:
        return self.ok


def is_strictly_diagonally_dominant(A: BandedMatrix) -> DominanceReport:
    """Weak dominance in every row with strict inequality in at least one
    (the irreducible-dominance form used by the solvability proof)."""
    margins = np.abs(A.diagonal()) - A.row_abs_offdiag_sums()
    ok = bool(np.all(margins >= 0) and np.any(margins > 0))
    return DominanceReport(ok, margins)


def is_irreducible_tridiagonal(A: BandedMatrix) -> bool:
    """True iff every sub- and super-diagonal entry is nonzero."""
    if A.lower != 1 or A.upper != 1:
        raise ValueError("irreducibility check expects a tridiagonal matrix")
    sub = A.data[2, :-1]     # entries (i+1, i)
    sup = A.data[0, 1:]      # entries (i, i+1)
    return bool(np.all(sub != 0) and np.all(sup != 0))


def is_entrywise_nonnegative(A: BandedMatrix) -> bool:
    for j in range(A.n):
        for d in range(A.lower + A.upper + 1):
            i = d - A.upper + j
            if 0 <= i < A.n and A.data[d, j] < 0:
                return False
    return True
