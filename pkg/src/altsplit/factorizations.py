"""Dense/sparse Cholesky, no-fill incomplete factorizations, triangular solves.

Sparse exact Cholesky numerics are delegated to SuperLU in symmetric mode
with pivoting disabled (the input is permuted by the caller-supplied
fill-reducing ordering first); the resulting factor is extracted into CSR
form so it satisfies the same contract as a hand-rolled up-looking
factorization.  Incomplete factorizations are computed row-wise on the
input pattern.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as _sp
import scipy.sparse.linalg as _spla

from .sparse_core import CsrMatrix

__all__ = [
    "NotPositiveDefiniteError",
    "FactorizationError",
    "DenseCholesky",
    "SparseCholesky",
    "IncompleteKind",
    "IncompleteFactor",
    "dense_cholesky",
    "sparse_cholesky",
    "ic0",
    "ilu0",
    "solve_lower",
    "solve_upper",
]


class FactorizationError(RuntimeError):
    pass


class NotPositiveDefiniteError(FactorizationError):
    """Nonpositive pivot encountered; ``index`` is the failing row."""

    def __init__(self, index: int, message: Optional[str] = None):
        self.index = index
        super().__init__(message or f"matrix not positive definite (pivot {index})")


def _check_symmetric(a: np.ndarray, rtol: float = 1e-12) -> None:
    nf = np.linalg.norm(a, "fro")
    if nf > 0 and np.max(np.abs(a - a.T)) > rtol * nf:
        raise ValueError("matrix is not symmetric")


@dataclass(frozen=True)
class DenseCholesky:
    n: int
    L: np.ndarray  # lower triangular

    def solve(self, b: np.ndarray) -> np.ndarray:
        y = solve_lower(self.L, b)
        return solve_upper(self.L.T, y)


def dense_cholesky(m: np.ndarray) -> DenseCholesky:
    """Lower Cholesky factor of a symmetric positive definite dense matrix.

    Raises NotPositiveDefiniteError carrying the index of the first
    nonpositive pivot.
    """
    a = np.array(m, dtype=np.float64)
    _check_symmetric(a)
    n = a.shape[0]
    L = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - L[j, :j] @ L[j, :j]
        if d <= 0.0:
            raise NotPositiveDefiniteError(j)
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return DenseCholesky(n, L)


@dataclass(frozen=True)
class SparseCholesky:
    n: int
    perm: np.ndarray
    L: CsrMatrix  # lower-triangular factor of the permuted matrix

    @cached_property
    def _lower(self) -> _sp.csr_matrix:
        return self.L.to_scipy()

    @cached_property
    def _upper(self) -> _sp.csr_matrix:
        return self._lower.T.tocsr()

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve M x = b where P M P^T = L L^T."""
        bp = np.asarray(b, dtype=np.float64)[self.perm]
        y = _spla.spsolve_triangular(self._lower, bp, lower=True)
        z = _spla.spsolve_triangular(self._upper, y, lower=False)
        out = np.empty_like(z)
        out[self.perm] = z
        return out


def sparse_cholesky(m: CsrMatrix, perm=None) -> SparseCholesky:
    """Sparse Cholesky of an SPD CsrMatrix under the given permutation.

    ``perm`` defaults to the identity; pass the output of
    ``ordering.amd_ordering`` to reduce fill.
    """
    n = m.nrows
    if m.ncols != n:
        raise ValueError("matrix must be square")
    perm = np.arange(n) if perm is None else np.asarray(perm, dtype=np.int64)
    s = m.to_scipy().tocsc()
    sp = s[perm, :][:, perm].tocsc()
    try:
        lu = _spla.splu(
            sp,
            permc_spec="NATURAL",
            diag_pivot_thresh=0.0,
            options=dict(SymmetricMode=True),
        )
    except RuntimeError as e:  # singular factor
        raise NotPositiveDefiniteError(-1, f"sparse factorization failed: {e}") from e
    if not np.array_equal(lu.perm_r, np.arange(n)) or not np.array_equal(
        lu.perm_c, np.arange(n)
    ):
        raise FactorizationError("unexpected pivoting during sparse Cholesky")
    d = lu.U.diagonal()
    bad = np.where(d <= 0)[0]
    if bad.size:
        raise NotPositiveDefiniteError(int(bad[0]))
    L = (lu.L @ _sp.diags(np.sqrt(d))).tocsr()
    return SparseCholesky(n, perm, CsrMatrix.from_scipy(L))


class IncompleteKind(enum.Enum):
    IC0 = "ic0"
    ILU0 = "ilu0"


@dataclass(frozen=True)
class IncompleteFactor:
    kind: IncompleteKind
    L: CsrMatrix
    Ut: Optional[CsrMatrix]  # upper factor; None for IC0 (Ut = L^T)
    shift_used: float = 0.0

    @cached_property
    def _lower(self) -> _sp.csr_matrix:
        return self.L.to_scipy()

    @cached_property
    def _upper(self) -> _sp.csr_matrix:
        if self.kind is IncompleteKind.IC0:
            return self._lower.T.tocsr()
        return self.Ut.to_scipy()

    def solve(self, b: np.ndarray) -> np.ndarray:
        y = _spla.spsolve_triangular(
            self._lower, np.asarray(b, dtype=np.float64), lower=True
        )
        return _spla.spsolve_triangular(self._upper, y, lower=False)


def _ic0_attempt(n, ro, ci, vals):
    """One IC(0) pass; returns CSR arrays of L restricted to the lower
    pattern, or the failing row index."""
    # work on lower triangle pattern, rows built left to right
    lrows_idx: list[np.ndarray] = []
    lrows_val: list[np.ndarray] = []
    for i in range(n):
        sel = ci[ro[i]:ro[i + 1]] <= i
        cols = ci[ro[i]:ro[i + 1]][sel]
        a_i = vals[ro[i]:ro[i + 1]][sel].copy()
        if cols.size == 0 or cols[-1] != i:
            return None, i
        li = np.zeros_like(a_i)
        pos = {int(c): t for t, c in enumerate(cols)}
        for t, j in enumerate(cols):
            j = int(j)
            s = a_i[t]
            # subtract sum_k L[i,k] L[j,k], k < j, over shared pattern
            row_j_idx = lrows_idx[j] if j < i else cols[: t]
            row_j_val = lrows_val[j] if j < i else li[: t]
            for kk, c in enumerate(row_j_idx):
                c = int(c)
                if c >= j:
                    break
                p = pos.get(c)
                if p is not None:
                    s -= li[p] * row_j_val[kk]
            if j < i:
                s /= lrows_val[j][-1]  # L[j,j]
                li[t] = s
            else:  # diagonal
                if s <= 0.0:
                    return None, i
                li[t] = np.sqrt(s)
        lrows_idx.append(cols)
        lrows_val.append(li)
    offs = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        offs[i + 1] = offs[i] + len(lrows_idx[i])
    return (
        CsrMatrix(n, n, offs, np.concatenate(lrows_idx), np.concatenate(lrows_val)),
        -1,
    )


def ic0(m: CsrMatrix, max_shift_retries: int = 10) -> IncompleteFactor:
    """No-fill incomplete Cholesky on the lower-triangular pattern of m.

    On pivot breakdown the factorization restarts from m + s*I with
    s = 1e-3 * max|diag| escalating by a factor 10 per retry.
    """
    n = m.nrows
    diag = m.diagonal()
    if np.any(diag <= 0):
        raise NotPositiveDefiniteError(int(np.argmin(diag)), "nonpositive diagonal")
    shift = 0.0
    base = 1e-3 * float(np.max(np.abs(diag)))
    for attempt in range(max_shift_retries + 1):
        work = m if shift == 0.0 else _add_diag(m, shift)
        L, fail = _ic0_attempt(n, work.row_offsets, work.col_indices,
                               work.values)
        if L is not None:
            return IncompleteFactor(IncompleteKind.IC0, L, None, shift_used=shift)
        shift = base if shift == 0.0 else shift * 10.0
    raise FactorizationError(
        f"IC(0) breakdown persists after {max_shift_retries} shift retries"
    )


def _add_diag(m: CsrMatrix, s: float) -> CsrMatrix:
    return CsrMatrix.from_scipy(m.to_scipy() + s * _sp.identity(m.nrows))


def ilu0(m: CsrMatrix) -> IncompleteFactor:
    """No-fill ILU on m's pattern with unit lower-triangular L.

    Deterministic row-wise (IKJ) elimination.  Raises on zero pivot; callers
    control any shifting themselves.
    """
    n = m.nrows
    if m.ncols != n:
        raise ValueError("matrix must be square")
    ro, ci = m.row_offsets, m.col_indices
    vals = m.values.copy()
    # row -> {col: position} lookup
    pos = [
        {int(c): p for p, c in zip(range(ro[i], ro[i + 1]), ci[ro[i]:ro[i + 1]])}
        for i in range(n)
    ]
    diag_pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        p = pos[i].get(i)
        if p is None:
            raise FactorizationError(f"row {i}: missing diagonal entry")
        diag_pos[i] = p
    for i in range(n):
        row_cols = ci[ro[i]:ro[i + 1]]
        for t, k in enumerate(row_cols):
            k = int(k)
            if k >= i:
                break
            pk = vals[diag_pos[k]]
            if pk == 0.0:
                raise FactorizationError(f"zero pivot in row {k}")
            lik = vals[ro[i] + t] / pk
            vals[ro[i] + t] = lik
            # update strictly-upper part of row k intersected with row i
            for pj in range(diag_pos[k] + 1, ro[k + 1]):
                j = int(ci[pj])
                p = pos[i].get(j)
                if p is not None:
                    vals[p] -= lik * vals[pj]
        if vals[diag_pos[i]] == 0.0:
            raise FactorizationError(f"zero pivot in row {i}")
    # split into unit-lower L and upper Ut
    lower = _sp.lil_matrix((n, n))
    upper = _sp.lil_matrix((n, n))
    for i in range(n):
        for p in range(ro[i], ro[i + 1]):
            j = int(ci[p])
            if j < i:
                lower[i, j] = vals[p]
            else:
                upper[i, j] = vals[p]
        lower[i, i] = 1.0
    return IncompleteFactor(
        IncompleteKind.ILU0,
        CsrMatrix.from_scipy(lower.tocsr()),
        CsrMatrix.from_scipy(upper.tocsr()),
    )


def _tri_solve_dense(L: np.ndarray, b: np.ndarray, lower: bool) -> np.ndarray:
    import scipy.linalg as _sla

    if np.any(np.diag(L) == 0):
        raise ZeroDivisionError("zero diagonal in triangular factor")
    return _sla.solve_triangular(L, np.asarray(b, dtype=np.float64), lower=lower)


def solve_lower(L, b: np.ndarray) -> np.ndarray:
    """Forward substitution with a lower-triangular factor (dense or CSR)."""
    if isinstance(L, CsrMatrix):
        if np.any(L.diagonal() == 0):
            raise ZeroDivisionError("zero diagonal in triangular factor")
        return _spla.spsolve_triangular(
            L.to_scipy(), np.asarray(b, dtype=np.float64), lower=True
        )
    return _tri_solve_dense(np.asarray(L), b, lower=True)


def solve_upper(U, b: np.ndarray) -> np.ndarray:
    """Back substitution with an upper-triangular factor (dense or CSR)."""
    if isinstance(U, CsrMatrix):
        if np.any(U.diagonal() == 0):
            raise ZeroDivisionError("zero diagonal in triangular factor")
        return _spla.spsolve_triangular(
            U.to_scipy(), np.asarray(b, dtype=np.float64), lower=False
        )
    return _tri_solve_dense(np.asarray(U), b, lower=False)
