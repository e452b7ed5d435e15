"""Dense desk-scale eigenvalue computation and the eigenvalue-bound
formulas for the preconditioned operator.

Everything here assumes the normalization ||A||_2 = ||U||_2 = 1 where the
formula arguments say so; callers normalize first (``LowRankUpdatedOperator
.normalize``).  Dense eigenvalue extraction is delegated to LAPACK via
numpy; the size caps keep this a desk-scale analysis tool.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as _sla

from .operators import LowRankUpdatedOperator
from .preconditioners import Preconditioner
from .sparse_core import tall_apply, tall_to_dense

__all__ = [
    "EIG_SYMMETRIC_CAP",
    "EIG_GENERAL_CAP",
    "Spectrum",
    "BoundsReport",
    "eig_symmetric",
    "eig_general",
    "preconditioned_spectrum",
    "iteration_matrix_radius",
    "bound_mu",
    "bound_re_lower",
    "bound_symm_interval",
    "eig_kernel_u",
    "eig_kernel_at",
    "rayleigh_lambda",
    "rho_upper_and_alpha_star",
    "alpha_heuristic",
    "bounds_report",
]

EIG_SYMMETRIC_CAP = 2000
EIG_GENERAL_CAP = 1000


@dataclass(frozen=True)
class Spectrum:
    """Complex eigenvalue multiset, conjugation-closed for real matrices."""

    eigenvalues: np.ndarray  # complex128

    @property
    def real(self) -> np.ndarray:
        return self.eigenvalues.real

    @property
    def imag(self) -> np.ndarray:
        return self.eigenvalues.imag

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as f:
            f.write("re,im\n")
            for lam in self.eigenvalues:
                f.write(f"{lam.real:.17g},{lam.imag:.17g}\n")


def eig_symmetric(m: np.ndarray) -> np.ndarray:
    """Eigenvalues of a symmetric dense matrix, ascending."""
    a = np.asarray(m, dtype=np.float64)
    n = a.shape[0]
    if n > EIG_SYMMETRIC_CAP:
        raise ValueError(f"size cap exceeded ({n} > {EIG_SYMMETRIC_CAP})")
    nf = np.linalg.norm(a, "fro")
    if nf > 0 and np.max(np.abs(a - a.T)) > 1e-10 * nf:
        raise ValueError("matrix is not symmetric")
    return np.sort(np.linalg.eigvalsh(0.5 * (a + a.T)))


def eig_general(m: np.ndarray) -> Spectrum:
    """Eigenvalues of a general real dense matrix."""
    a = np.asarray(m, dtype=np.float64)
    n = a.shape[0]
    if n > EIG_GENERAL_CAP:
        raise ValueError(f"size cap exceeded ({n} > {EIG_GENERAL_CAP})")
    vals = np.linalg.eigvals(a)
    order = np.lexsort((vals.imag, vals.real))
    return Spectrum(vals[order].astype(np.complex128))


def _dense_preconditioned(op: LowRankUpdatedOperator, precond: Preconditioner) -> np.ndarray:
    ag = op.assemble_dense(cap=EIG_GENERAL_CAP)
    return np.column_stack([precond.apply(col) for col in ag.T])


def preconditioned_spectrum(
    op: LowRankUpdatedOperator, precond: Preconditioner
) -> Spectrum:
    """Spectrum of P^{-1} A_g, assembled column by column at desk scale.

    Symmetrized preconditioners on a symmetric operator route through the
    generalized symmetric-definite eigenproblem, so the result is exactly
    real.
    """
    if op.n > EIG_GENERAL_CAP:
        raise ValueError(f"size cap exceeded ({op.n} > {EIG_GENERAL_CAP})")
    ag = op.assemble_dense(cap=EIG_GENERAL_CAP)
    if precond.kind in ("symmetrized", "symmetrized_inexact") and np.max(
        np.abs(ag - ag.T)
    ) <= 1e-10 * np.linalg.norm(ag, "fro"):
        # P^S is SPD; eigenvalues of (P^S)^{-1} A_g solve A_g x = lambda P^S x
        pinv = precond.assemble_dense_inverse_action()
        ps = np.linalg.inv(0.5 * (pinv + pinv.T))
        vals = _sla.eigh(0.5 * (ag + ag.T), 0.5 * (ps + ps.T), eigvals_only=True)
        return Spectrum(np.sort(vals).astype(np.complex128))
    return eig_general(_dense_preconditioned(op, precond))


def iteration_matrix_radius(op: LowRankUpdatedOperator, alpha: float) -> float:
    """Spectral radius of the alternating-iteration matrix
    (aI + gUU^T)^{-1} (aI - A) (aI + A)^{-1} (aI - gUU^T)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if op.n > EIG_GENERAL_CAP:
        raise ValueError(f"size cap exceeded ({op.n} > {EIG_GENERAL_CAP})")
    a, u, g = op.effective_parts()
    ad = a.to_dense()
    ud = tall_to_dense(u)
    n = op.n
    guut = g * (ud @ ud.T)
    i_n = np.eye(n)
    t = np.linalg.solve(alpha * i_n + guut,
                        (alpha * i_n - ad) @ np.linalg.solve(alpha * i_n + ad,
                                                             alpha * i_n - guut))
    return float(np.max(np.abs(eig_general(t).eigenvalues)))


# ---------------------------------------------------------------------------
# closed-form bounds (normalized operator: ||A||_2 = ||U||_2 = 1)
# ---------------------------------------------------------------------------

def bound_mu(alpha: float, gamma: float, lambda_min_sym: float) -> float:
    """Lower bound for real eigenvalues of P_a^{-1} A_g:
    mu = alpha * lambda_min(A + A^T) / ((1 + alpha)(alpha + gamma))."""
    if alpha <= 0 or gamma <= 0:
        raise ValueError("alpha and gamma must be positive")
    return alpha * lambda_min_sym / ((1.0 + alpha) * (alpha + gamma))


def bound_re_lower(alpha: float, gamma: float, lambda_min_a: float) -> float:
    """Lower bound on Re(lambda) for SPD A:
    2 a (a+1)(a+g) lambda_min(A) / ((a+1)^2 (a+g)^2 + g^2)."""
    if alpha <= 0 or gamma <= 0:
        raise ValueError("alpha and gamma must be positive")
    num = 2.0 * alpha * (alpha + 1.0) * (alpha + gamma) * lambda_min_a
    den = (alpha + 1.0) ** 2 * (alpha + gamma) ** 2 + gamma**2
    return num / den


def bound_symm_interval(
    alpha: float, gamma: float, lambda_min_a: float
) -> tuple[float, float]:
    """Open interval containing the (all real) eigenvalues of the
    symmetrized-preconditioned matrix for SPD A."""
    if alpha <= 0 or gamma <= 0:
        raise ValueError("alpha and gamma must be positive")
    lo = 2.0 * alpha * lambda_min_a / ((1.0 + alpha) * (alpha + gamma))
    hi = (2.0 + 2.0 * gamma) / (lambda_min_a + alpha)
    return lo, hi


def eig_kernel_u(eta: float, alpha: float) -> float:
    """Preconditioned eigenvalue 2 eta / (eta + alpha) for an eigenpair of A
    whose eigenvector lies in Ker(U^T); independent of gamma."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return 2.0 * eta / (eta + alpha)


def eig_kernel_at(utx_norm_sq: float, alpha: float, gamma: float) -> float:
    """Preconditioned eigenvalue 2 / (1 + alpha / (gamma ||U^T x||^2)) for an
    eigenvector in Ker(A^T); independent of A."""
    if utx_norm_sq <= 0:
        raise ValueError(
            "||U^T x||^2 must be positive (zero contradicts nonsingularity)"
        )
    return 2.0 / (1.0 + alpha / (gamma * utx_norm_sq))


def rayleigh_lambda(
    op: LowRankUpdatedOperator, alpha: float, x: np.ndarray
) -> float:
    """Eigenvalue formula evaluated at a unit vector x:
    2a (x*Ax + g||U^T x||^2) / (a x*Ax + g x*A U U^T x + a^2 + a g ||U^T x||^2).
    """
    x = np.asarray(x, dtype=np.float64)
    if abs(np.linalg.norm(x) - 1.0) > 1e-12:
        raise ValueError("x must have unit 2-norm")
    a, u, g = op.effective_parts()
    ax = a.to_scipy() @ x
    utx = tall_apply(u, x, transpose=True)
    uutx = tall_apply(u, utx)
    xax = float(x @ ax)
    xauutx = float(x @ (a.to_scipy() @ uutx))
    utx2 = float(utx @ utx)
    num = 2.0 * alpha * (xax + g * utx2)
    den = alpha * xax + g * xauutx + alpha**2 + alpha * g * utx2
    return num / den


def rho_upper_and_alpha_star(eigs_a: np.ndarray):
    """For SPD A with eigenvalues eigs_a (ascending), return the upper-bound
    function rho(alpha) = max_i |alpha - l_i| / (alpha + l_i) and its
    minimizer alpha* = sqrt(l_1 l_n)."""
    eigs = np.asarray(eigs_a, dtype=np.float64)
    if np.any(eigs <= 0):
        raise ValueError("eigenvalues must be positive")

    def rho_fn(alpha: float) -> float:
        return float(np.max(np.abs(alpha - eigs) / (alpha + eigs)))

    alpha_star = float(np.sqrt(eigs[0] * eigs[-1]))
    return rho_fn, alpha_star


def alpha_heuristic(gamma: float) -> float:
    """sqrt(gamma): the maximizer of the mu lower bound over alpha."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return float(np.sqrt(gamma))


@dataclass
class BoundsReport:
    mu: float
    lower_bound_re: float
    symm_interval: tuple[float, float]
    rho_upper: float
    alpha_star: float
    alpha_heuristic: float
    min_re: Optional[float] = None
    max_re: Optional[float] = None
    max_abs_im: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "lower_bound_re": self.lower_bound_re,
            "symm_interval_lo": self.symm_interval[0],
            "symm_interval_hi": self.symm_interval[1],
            "rho_upper": self.rho_upper,
            "alpha_star": self.alpha_star,
            "alpha_heuristic": self.alpha_heuristic,
            "min_re": self.min_re,
            "max_re": self.max_re,
            "max_abs_im": self.max_abs_im,
        }


def bounds_report(
    op: LowRankUpdatedOperator,
    alpha: float,
    spectrum: Optional[Spectrum] = None,
) -> BoundsReport:
    """Evaluate every closed-form bound for a (normalized) operator.

    The caller normalizes first; gamma is read off the operator.  When a
    precomputed preconditioned spectrum is passed, the empirical min/max
    real part and max |Im| columns are filled in.
    """
    a, _, gamma = op.effective_parts()
    ad = a.to_dense()
    sym_eigs = eig_symmetric(ad + ad.T)
    lam_min_sym = float(sym_eigs[0])
    a_eigs = eig_symmetric(0.5 * (ad + ad.T))
    lam_min_a = float(a_eigs[0])
    mu = bound_mu(alpha, gamma, lam_min_sym)
    lb = bound_re_lower(alpha, gamma, lam_min_a)
    interval = bound_symm_interval(alpha, gamma, lam_min_a)
    if np.all(a_eigs > 0):
        rho_fn, alpha_star = rho_upper_and_alpha_star(a_eigs)
        rho_up = rho_fn(alpha)
    else:
        rho_up, alpha_star = float("nan"), float("nan")
    rep = BoundsReport(
        mu=mu,
        lower_bound_re=lb,
        symm_interval=interval,
        rho_upper=rho_up,
        alpha_star=alpha_star,
        alpha_heuristic=alpha_heuristic(gamma),
    )
    if spectrum is not None:
        rep.min_re = float(np.min(spectrum.real))
        rep.max_re = float(np.max(spectrum.real))
        rep.max_abs_im = float(np.max(np.abs(spectrum.imag)))
    return rep
