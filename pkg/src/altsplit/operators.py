"""Matrix-free operator A_g = A + gamma*U*U^T and its application builders.

The operator is never assembled during solves; products are computed as
A x + gamma * U (U^T x).  An optional diagonal scaling d (holding the
square roots of the diagonal of A_g) turns applications into
D^{-1/2} A_g D^{-1/2} x without touching the stored A and U.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as _sp

from .sparse_core import (
    CsrMatrix,
    DimensionError,
    TallMatrix,
    tall_apply,
    tall_shape,
    tall_to_dense,
    two_norm_estimate,
)

__all__ = [
    "LowRankUpdatedOperator",
    "NormalizationRecord",
    "from_augmented_lagrangian",
    "from_kkt_schur",
    "from_normal_equations",
]

DENSE_ASSEMBLY_CAP = 2000


@dataclass(frozen=True)
class LowRankUpdatedOperator:
    """A + gamma*U*U^T with optional symmetric diagonal scaling."""

    A: CsrMatrix
    U: TallMatrix
    gamma: float
    scaling: Optional[np.ndarray] = None  # entries of D^{1/2}

    def __post_init__(self):
        n = self.A.nrows
        if self.A.ncols != n:
            raise ValueError("A must be square")
        un, uk = tall_shape(self.U)
        if un != n:
            raise DimensionError("U row count must match A")
        if not (1 <= uk < n):
            raise ValueError(f"need 1 <= k < n, got k={uk}, n={n}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.scaling is not None:
            s = np.asarray(self.scaling, dtype=np.float64)
            if s.shape != (n,) or np.any(s <= 0):
                raise ValueError("scaling must be a length-n strictly positive vector")
            object.__setattr__(self, "scaling", s)

    @property
    def n(self) -> int:
        return self.A.nrows

    @property
    def k(self) -> int:
        return tall_shape(self.U)[1]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Return A_g x (scaled form when scaling is set).

        Order is fixed: t = U^T x first, then A x + gamma * U t.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise DimensionError(f"expected vector of length {self.n}")
        if self.scaling is not None:
            x = x / self.scaling
        t = tall_apply(self.U, x, transpose=True)
        y = self.A.to_scipy() @ x + self.gamma * tall_apply(self.U, t)
        if self.scaling is not None:
            y = y / self.scaling
        return y

    def diag_gamma(self) -> np.ndarray:
        """Diagonal of A_g: a_ii + gamma * ||row_i(U)||^2 (scaled if set)."""
        if isinstance(self.U, CsrMatrix):
            u2 = np.asarray(self.U.to_scipy().multiply(self.U.to_scipy()).sum(axis=1)).ravel()
        else:
            u2 = np.sum(self.U * self.U, axis=1)
        d = self.A.diagonal() + self.gamma * u2
        if self.scaling is not None:
            d = d / (self.scaling * self.scaling)
        return d

    def with_diagonal_scaling(self) -> "LowRankUpdatedOperator":
        """Operator representing D^{-1/2} A_g D^{-1/2} with D = diag(A_g).

        Idempotent on an operator that already has unit diagonal.
        """
        d = self.diag_gamma()
        bad = np.where(d <= 0)[0]
        if bad.size:
            raise ValueError(f"nonpositive diagonal entry at index {int(bad[0])}")
        prev = self.scaling if self.scaling is not None else np.ones(self.n)
        return replace(self, scaling=prev * np.sqrt(d))

    def effective_parts(self) -> tuple[CsrMatrix, TallMatrix, float]:
        """Materialize (A, U, gamma) of the linear map this operator applies.

        With scaling set this is (D^{-1/2} A D^{-1/2}, D^{-1/2} U, gamma);
        preconditioner builders work on these parts so the section-3 scaled
        preconditioner identity holds by construction.
        """
        if self.scaling is None:
            return self.A, self.U, self.gamma
        inv = 1.0 / self.scaling
        dinv = _sp.diags(inv)
        a = CsrMatrix.from_scipy(dinv @ self.A.to_scipy() @ dinv)
        if isinstance(self.U, CsrMatrix):
            u: TallMatrix = CsrMatrix.from_scipy(dinv @ self.U.to_scipy())
        else:
            u = inv[:, None] * self.U
        return a, u, self.gamma

    def assemble_dense(self, cap: int = DENSE_ASSEMBLY_CAP) -> np.ndarray:
        """Dense A + gamma*U*U^T (scaled if scaling set); testing/spectra only."""
        if self.n > cap:
            raise ValueError(f"dense assembly cap exceeded ({self.n} > {cap})")
        a, u, g = self.effective_parts()
        ud = tall_to_dense(u)
        return a.to_dense() + g * (ud @ ud.T)

    def normalize(self, tol: float = 1e-6) -> tuple["LowRankUpdatedOperator", "NormalizationRecord"]:
        """Rescale so ||A||_2 = ||U||_2 = 1, replacing gamma with
        gamma * ||U||^2 / ||A||."""
        na = two_norm_estimate(self.A, tol=tol).value
        nu = two_norm_estimate(self.U, tol=tol).value
        if na == 0 or nu == 0:
            raise ValueError("cannot normalize a zero A or U")
        a = self.A.scale_values(1.0 / na)
        if isinstance(self.U, CsrMatrix):
            u: TallMatrix = self.U.scale_values(1.0 / nu)
        else:
            u = self.U / nu
        gt = self.gamma * nu * nu / na
        rec = NormalizationRecord(norm_a=na, norm_u=nu, gamma_tilde=gt)
        return replace(self, A=a, U=u, gamma=gt), rec

    def probe_positive_definite(self, trials: int = 50, seed: int = 0) -> bool:
        """Randomized check that x^T A_g x > 0; a failed probe warns only."""
        rng = np.random.Generator(np.random.Philox(seed))
        for _ in range(trials):
            x = rng.standard_normal(self.n)
            if x @ self.apply(x) <= 0:
                warnings.warn(
                    "operator failed the positive-definiteness probe; "
                    "Ker(A) and Ker(U^T) may intersect",
                    stacklevel=2,
                )
                return False
        return True


@dataclass(frozen=True)
class NormalizationRecord:
    norm_a: float
    norm_u: float
    gamma_tilde: float


def from_augmented_lagrangian(
    A: CsrMatrix, B: CsrMatrix, W_diag: np.ndarray, gamma: float
) -> LowRankUpdatedOperator:
    """Operator A + gamma * B^T W^{-1} B with U = B^T W^{-1/2} stored sparse."""
    w = np.asarray(W_diag, dtype=np.float64)
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    if B.ncols != A.nrows or w.shape != (B.nrows,):
        raise DimensionError("B must be k x n with k weights")
    u = B.to_scipy().T.tocsr() @ _sp.diags(1.0 / np.sqrt(w))
    return LowRankUpdatedOperator(A, CsrMatrix.from_scipy(u), gamma)


def from_kkt_schur(
    H: CsrMatrix, C: CsrMatrix, z: np.ndarray, lam: np.ndarray
) -> LowRankUpdatedOperator:
    """Schur-complement operator H + C^T Z^{-1} Lambda C (gamma = 1)."""
    z = np.asarray(z, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(z <= 0) or np.any(lam <= 0):
        raise ValueError("z and lambda entries must be strictly positive")
    if C.ncols != H.nrows or z.shape != (C.nrows,) or lam.shape != (C.nrows,):
        raise DimensionError("C must be k x n with k-length z, lambda")
    u = C.to_scipy().T.tocsr() @ _sp.diags(np.sqrt(lam / z))
    return LowRankUpdatedOperator(H, CsrMatrix.from_scipy(u), 1.0)


def from_normal_equations(
    B1: CsrMatrix, B2: np.ndarray
) -> tuple[LowRankUpdatedOperator, Callable[[np.ndarray], np.ndarray]]:
    """Normal-equations operator B1^T B1 + B2^T B2 (gamma = 1).

    The sparse Gram matrix B1^T B1 is assembled explicitly (it stays sparse
    and enables the shifted incomplete factorization); B2^T is kept dense.
    Also returns a right-hand-side builder mapping the stacked residual
    vector c to B1^T c1 + B2^T c2.
    """
    b2 = np.asarray(B2, dtype=np.float64)
    if b2.shape[1] != B1.ncols:
        raise DimensionError("B1 and B2 must have the same column count")
    m1 = B1.nrows
    s1 = B1.to_scipy()
    a = CsrMatrix.from_scipy((s1.T @ s1).tocsr())
    op = LowRankUpdatedOperator(a, b2.T.copy(), 1.0)

    def rhs_builder(c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=np.float64)
        if c.shape != (m1 + b2.shape[0],):
            raise DimensionError("c must have length m = (m-k) + k")
        return s1.T @ c[:m1] + b2.T @ c[m1:]

    return op, rhs_builder
