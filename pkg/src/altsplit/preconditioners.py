"""Alternating-splitting preconditioners and the SMW inner solver.

Every preconditioner exposes the same contract: ``apply(r)`` returns
z = P^{-1} r for a linear map P that is fixed for the lifetime of the
object.  The shift term alpha*I + gamma*U*U^T is always inverted exactly
through the Sherman-Morrison-Woodbury identity; the A + alpha*I factor is
either an exact sparse Cholesky or a no-fill incomplete factorization.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

import numpy as np
import scipy.sparse as _sp

from .factorizations import (
    DenseCholesky,
    IncompleteFactor,
    NotPositiveDefiniteError,
    SparseCholesky,
    dense_cholesky,
    ic0,
    ilu0,
    sparse_cholesky,
)
from .operators import LowRankUpdatedOperator
from .ordering import amd_ordering
from .sparse_core import CsrMatrix, DimensionError, TallMatrix, tall_apply, tall_shape

__all__ = [
    "SMW_DENSE_MAX_K",
    "Mode",
    "SmwSolver",
    "build_smw",
    "Preconditioner",
    "identity_preconditioner",
    "build_product",
    "build_symmetrized",
    "build_unshifted",
    "build_shift_only",
]

SMW_DENSE_MAX_K = 512


class Mode(enum.Enum):
    EXACT = "exact"
    INEXACT = "inexact"


@dataclass(frozen=True)
class SmwSolver:
    """Factorized inverse of alpha*I_n + gamma*U*U^T.

    Holds the k x k Cholesky factor of alpha*I_k + gamma*U^T U, computed
    once at construction; ``apply`` then costs two tall products and one
    small triangular solve pair.
    """

    alpha: float
    gamma: float
    U: TallMatrix
    chol: Union[DenseCholesky, SparseCholesky]

    @property
    def n(self) -> int:
        return tall_shape(self.U)[0]

    def apply(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (self.n,):
            raise DimensionError(f"expected vector of length {self.n}")
        t = tall_apply(self.U, r, transpose=True)
        s = self.chol.solve(t)
        return r / self.alpha - (self.gamma / self.alpha) * tall_apply(self.U, s)


def build_smw(u: TallMatrix, alpha: float, gamma: float) -> SmwSolver:
    """Build the SMW solver for alpha*I + gamma*U*U^T (alpha, gamma > 0).

    The k x k Gram matrix is kept sparse when U is sparse; the factorization
    is dense for k <= SMW_DENSE_MAX_K, sparse Cholesky with fill-reducing
    ordering beyond that.
    """
    if not alpha > 0 or not gamma > 0:
        raise ValueError("alpha and gamma must be positive")
    k = tall_shape(u)[1]
    if isinstance(u, CsrMatrix):
        us = u.to_scipy()
        gram = (us.T @ us).tocsr()
        kk = (gram * gamma + alpha * _sp.identity(k)).tocsr()
        if k <= SMW_DENSE_MAX_K:
            chol: Union[DenseCholesky, SparseCholesky] = dense_cholesky(kk.toarray())
        else:
            km = CsrMatrix.from_scipy(kk)
            chol = sparse_cholesky(km, amd_ordering(km))
    else:
        ud = np.asarray(u, dtype=np.float64)
        kk_d = gamma * (ud.T @ ud) + alpha * np.eye(k)
        chol = dense_cholesky(kk_d)
    return SmwSolver(alpha, gamma, u, chol)


# ---------------------------------------------------------------------------
# preconditioner variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Preconditioner:
    """Fixed linear map z = P^{-1} r.

    ``first`` inverts the A-side factor (exact Cholesky or incomplete
    factor), ``smw`` inverts the shift factor; either may be absent
    depending on the variant.
    """

    kind: str
    n: int
    smw: Optional[SmwSolver] = None
    first: Optional[Union[SparseCholesky, IncompleteFactor]] = None
    # symmetrized variant: solves with the Cholesky factor alone
    sym_lower: Optional[CsrMatrix] = None
    sym_perm: Optional[np.ndarray] = None

    def apply(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (self.n,):
            raise DimensionError(f"expected vector of length {self.n}")
        if self.kind == "identity":
            return r.copy()
        if self.kind in ("product", "product_inexact"):
            return self.first.solve(self.smw.apply(r))
        if self.kind == "unshifted":
            return self.first.solve(self.smw.apply(r))
        if self.kind == "shift_only":
            return self.first.solve(r)
        if self.kind in ("symmetrized", "symmetrized_inexact"):
            return self._apply_symmetrized(r)
        raise ValueError(f"unknown preconditioner kind {self.kind!r}")

    @cached_property
    def _sym_l(self):
        return self.sym_lower.to_scipy()

    @cached_property
    def _sym_lt(self):
        return self._sym_l.T.tocsr()

    def _apply_symmetrized(self, r: np.ndarray) -> np.ndarray:
        import scipy.sparse.linalg as _spla

        rp = r[self.sym_perm] if self.sym_perm is not None else r
        y = _spla.spsolve_triangular(self._sym_l, rp, lower=True)
        z = self.smw.apply(y)
        w = _spla.spsolve_triangular(self._sym_lt, z, lower=False)
        return _unpermute(w, self.sym_perm)

    def assemble_dense_inverse_action(self) -> np.ndarray:
        """Dense matrix of the map r -> apply(r) (testing/spectra only)."""
        cols = [self.apply(e) for e in np.eye(self.n)]
        return np.column_stack(cols)


def _unpermute(v: np.ndarray, perm) -> np.ndarray:
    if perm is None:
        return v
    out = np.empty_like(v)
    out[perm] = v
    return out


def identity_preconditioner(n: int) -> Preconditioner:
    return Preconditioner(kind="identity", n=n)


def _is_symmetric(a: CsrMatrix, rtol: float = 1e-10) -> bool:
    s = a.to_scipy()
    diff = abs(s - s.T)
    nrm = abs(s).max() if s.nnz else 0.0
    return diff.nnz == 0 or (nrm > 0 and diff.max() <= rtol * nrm)


def _shifted(a: CsrMatrix, alpha: float) -> CsrMatrix:
    return CsrMatrix.from_scipy(
        (a.to_scipy() + alpha * _sp.identity(a.nrows)).tocsr()
    )


def _first_factor(a: CsrMatrix, alpha: float, mode: Mode):
    """Solver for A + alpha*I: exact sparse Cholesky (symmetric A only) or
    no-fill incomplete factorization (IC(0) symmetric / ILU(0) otherwise)."""
    sh = _shifted(a, alpha)
    symmetric = _is_symmetric(a)
    if mode is Mode.EXACT:
        if not symmetric:
            raise ValueError(
                "exact mode requires symmetric A (sparse LU is out of scope); "
                "use inexact mode for nonsymmetric problems"
            )
        return sparse_cholesky(sh, amd_ordering(sh))
    if symmetric:
        return ic0(sh)
    return ilu0(sh)


def build_product(
    op: LowRankUpdatedOperator, alpha: float, mode: Mode = Mode.EXACT
) -> Preconditioner:
    """Product preconditioner (A + alpha*I)(alpha*I + gamma*U*U^T), the
    1/(2 alpha) scalar dropped.

    ``apply`` solves the shift factor first (via SMW), then the A-side
    factor.  Inexact mode replaces the exact A-side solve with the no-fill
    incomplete factorization of A + alpha*I.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    a, u, gamma = op.effective_parts()
    first = _first_factor(a, alpha, mode)
    smw = build_smw(u, alpha, gamma)
    kind = "product" if mode is Mode.EXACT else "product_inexact"
    return Preconditioner(kind=kind, n=op.n, smw=smw, first=first)


def build_symmetrized(
    op: LowRankUpdatedOperator, alpha: float, mode: Mode = Mode.EXACT
) -> Preconditioner:
    """Symmetrized preconditioner L (alpha*I + gamma*U*U^T) L^T with L the
    (incomplete) Cholesky factor of A + alpha*I; SPD, usable with CG."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    a, u, gamma = op.effective_parts()
    if not _is_symmetric(a):
        raise ValueError("symmetrized preconditioner requires symmetric A")
    sh = _shifted(a, alpha)
    if mode is Mode.EXACT:
        f = sparse_cholesky(sh, amd_ordering(sh))
        lower, perm = f.L, f.perm
        kind = "symmetrized"
    else:
        f = ic0(sh)
        lower, perm = f.L, None
        kind = "symmetrized_inexact"
    smw = build_smw(u, alpha, gamma)
    return Preconditioner(kind=kind, n=op.n, smw=smw, sym_lower=lower, sym_perm=perm)


def build_unshifted(op: LowRankUpdatedOperator, alpha: float) -> Preconditioner:
    """Unshifted variant A (alpha*I + gamma*U*U^T); requires SPD A."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    a, u, gamma = op.effective_parts()
    if not _is_symmetric(a):
        raise ValueError("unshifted variant requires symmetric A")
    try:
        first = sparse_cholesky(a, amd_ordering(a))
    except NotPositiveDefiniteError as e:
        raise NotPositiveDefiniteError(
            e.index, "A is not positive definite; use the shifted product variant"
        ) from e
    smw = build_smw(u, alpha, gamma)
    return Preconditioner(kind="unshifted", n=op.n, smw=smw, first=first)


def build_shift_only(
    op: LowRankUpdatedOperator, alpha: float, mode: Mode = Mode.INEXACT
) -> Preconditioner:
    """Baseline M_alpha: (incomplete) factorization of A + alpha*I alone."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    a, _, _ = op.effective_parts()
    first = _first_factor(a, alpha, mode)
    return Preconditioner(kind="shift_only", n=op.n, first=first)
