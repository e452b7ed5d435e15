"""Restarted right-preconditioned GMRES, PCG, and the stationary
alternating iteration the product preconditioner is derived from.

Convergence is always declared on the true relative residual
||b - A_g x|| / ||b||; inside a GMRES cycle the Givens estimate is used
and confirmed against the true residual at each restart boundary.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .factorizations import sparse_cholesky
from .operators import LowRankUpdatedOperator
from .ordering import amd_ordering
from .preconditioners import (
    Mode,
    Preconditioner,
    _is_symmetric,
    _shifted,
    build_smw,
    identity_preconditioner,
)
from .sparse_core import DimensionError, tall_apply

__all__ = [
    "SolveOptions",
    "SolveReport",
    "NumericalBreakdownError",
    "NotSpdError",
    "gmres_right",
    "pcg",
    "stationary_alternating",
]

STATIONARY_DENSE_CAP = 2000


class NumericalBreakdownError(RuntimeError):
    """NaN/Inf appeared during the iteration."""


class NotSpdError(RuntimeError):
    """PCG detected an indefinite operator or preconditioner."""


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-6
    maxit: int = 2000
    restart: int = 20
    x0: Optional[np.ndarray] = None
    beta: float = 1.0  # damping for the stationary iteration

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.restart < 1:
            raise ValueError("restart must be >= 1")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_history: list[float] = field(default_factory=list)
    setup_seconds: float = 0.0
    solve_seconds: float = 0.0

    @property
    def final_relres(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("nan")


def _true_relres(op: LowRankUpdatedOperator, b, x, bnorm) -> float:
    return float(np.linalg.norm(b - op.apply(x)) / bnorm)


def gmres_right(
    op: LowRankUpdatedOperator,
    b: np.ndarray,
    precond: Optional[Preconditioner] = None,
    opts: SolveOptions = SolveOptions(),
) -> tuple[np.ndarray, SolveReport]:
    """Restarted GMRES with right preconditioning.

    Arnoldi with single-pass modified Gram-Schmidt and Givens-rotation
    least squares.  ``iterations`` counts every Arnoldi step across
    restarts.  Happy breakdown returns the current solution.
    """
    b = np.asarray(b, dtype=np.float64)
    n = op.n
    if b.shape != (n,):
        raise DimensionError(f"rhs must have length {n}")
    P = precond if precond is not None else identity_preconditioner(n)
    bnorm = float(np.linalg.norm(b))
    t0 = time.perf_counter()
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(True, 0, [0.0], 0.0, time.perf_counter() - t0)
    x = np.zeros(n) if opts.x0 is None else np.asarray(opts.x0, dtype=np.float64).copy()

    m = opts.restart
    history: list[float] = []
    total = 0
    converged = False

    while total < opts.maxit and not converged:
        r = b - op.apply(x)
        beta0 = float(np.linalg.norm(r))
        if not np.isfinite(beta0):
            raise NumericalBreakdownError("non-finite residual")
        if beta0 / bnorm < opts.tol:
            converged = True
            if not history:
                history.append(beta0 / bnorm)
            break
        V = np.zeros((n, m + 1))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        V[:, 0] = r / beta0
        g[0] = beta0
        cols = 0
        for j in range(m):
            if total >= opts.maxit:
                break
            w = op.apply(P.apply(V[:, j]))
            for i in range(j + 1):
                H[i, j] = V[:, i] @ w
                w -= H[i, j] * V[:, i]
            hnext = float(np.linalg.norm(w))
            if not np.isfinite(hnext):
                raise NumericalBreakdownError("non-finite Arnoldi coefficient")
            H[j + 1, j] = hnext
            # previous Givens rotations
            for i in range(j):
                h0 = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = h0
            # new rotation annihilating the subdiagonal
            denom = np.hypot(H[j, j], H[j + 1, j])
            cs[j], sn[j] = (1.0, 0.0) if denom == 0.0 else (H[j, j] / denom, H[j + 1, j] / denom)
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            cols = j + 1
            est = abs(g[j + 1]) / bnorm
            history.append(est)
            happy = hnext <= 1e-14 * beta0  # Krylov subspace exhausted
            if happy or est < opts.tol:
                break
            if j + 1 < m:
                V[:, j + 1] = w / hnext
        # solve the small least-squares system and update x
        if cols > 0:
            y = np.zeros(cols)
            for i in range(cols - 1, -1, -1):
                y[i] = (g[i] - H[i, i + 1:cols] @ y[i + 1:cols]) / H[i, i]
            x = x + P.apply(V[:, :cols] @ y)
        true_rr = _true_relres(op, b, x, bnorm)
        if history:
            history[-1] = true_rr  # confirm the Givens estimate at the boundary
        if true_rr < opts.tol:
            converged = True

    report = SolveReport(
        converged=converged,
        iterations=total,
        residual_history=history,
        solve_seconds=time.perf_counter() - t0,
    )
    if not np.all(np.isfinite(x)):
        raise NumericalBreakdownError("non-finite solution")
    return x, report


def pcg(
    op: LowRankUpdatedOperator,
    b: np.ndarray,
    precond: Optional[Preconditioner] = None,
    opts: SolveOptions = SolveOptions(),
) -> tuple[np.ndarray, SolveReport]:
    """Preconditioned conjugate gradients; requires symmetric A_g and an
    SPD preconditioner map."""
    b = np.asarray(b, dtype=np.float64)
    n = op.n
    if b.shape != (n,):
        raise DimensionError(f"rhs must have length {n}")
    P = precond if precond is not None else identity_preconditioner(n)
    bnorm = float(np.linalg.norm(b))
    t0 = time.perf_counter()
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(True, 0, [0.0], 0.0, time.perf_counter() - t0)
    x = np.zeros(n) if opts.x0 is None else np.asarray(opts.x0, dtype=np.float64).copy()
    r = b - op.apply(x)
    z = P.apply(r)
    p = z.copy()
    rz = float(r @ z)
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, opts.maxit + 1):
        Ap = op.apply(p)
        pAp = float(p @ Ap)
        if pAp <= 0:
            raise NotSpdError("operator not SPD (p^T A p <= 0)")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rr = float(np.linalg.norm(r) / bnorm)
        history.append(rr)
        if rr < opts.tol:
            converged = True
            break
        z = P.apply(r)
        rz_new = float(r @ z)
        if rz_new <= 0:
            raise NotSpdError("preconditioner not SPD (r^T z <= 0)")
        p = z + (rz_new / rz) * p
        rz = rz_new
    # confirm on the true residual
    if converged:
        true_rr = _true_relres(op, b, x, bnorm)
        history[-1] = true_rr
        converged = true_rr < opts.tol
    return x, SolveReport(
        converged=converged,
        iterations=it,
        residual_history=history,
        solve_seconds=time.perf_counter() - t0,
    )


def stationary_alternating(
    op: LowRankUpdatedOperator,
    b: np.ndarray,
    alpha: float,
    opts: SolveOptions = SolveOptions(),
) -> tuple[np.ndarray, SolveReport]:
    """Two-half-step alternating iteration with exact inner solves.

    Each sweep solves (A + alpha*I) x_half = (alpha*I - gamma*U*U^T) x + b
    then (alpha*I + gamma*U*U^T) x_new = (alpha*I - A) x_half + b.
    With beta < 1 the update is blended: x <- (1-beta) x + beta x_new
    (needed when the symmetric part of A is only positive semidefinite).

    A symmetric uses a sparse Cholesky of A + alpha*I; a nonsymmetric A is
    handled by a dense factorization at desk scale (n <= 2000) since sparse
    LU is out of scope.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    b = np.asarray(b, dtype=np.float64)
    n = op.n
    if b.shape != (n,):
        raise DimensionError(f"rhs must have length {n}")
    t0 = time.perf_counter()
    a, u, gamma = op.effective_parts()
    sh = _shifted(a, alpha)
    if _is_symmetric(a):
        chol = sparse_cholesky(sh, amd_ordering(sh))
        solve_shifted = chol.solve
    else:
        if n > STATIONARY_DENSE_CAP:
            raise ValueError(
                "stationary iteration with nonsymmetric A needs a dense "
                f"factorization, only available for n <= {STATIONARY_DENSE_CAP}; "
                "use GMRES instead"
            )
        import scipy.linalg as _sla

        lu = _sla.lu_factor(sh.to_dense())
        solve_shifted = lambda v: _sla.lu_solve(lu, v)
    smw = build_smw(u, alpha, gamma)
    a_s = a.to_scipy()

    def u_ut(x):
        return tall_apply(u, tall_apply(u, x, transpose=True))

    setup = time.perf_counter() - t0
    t1 = time.perf_counter()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(True, 0, [0.0], setup, time.perf_counter() - t1)
    x = np.zeros(n) if opts.x0 is None else np.asarray(opts.x0, dtype=np.float64).copy()
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, opts.maxit + 1):
        xh = solve_shifted(alpha * x - gamma * u_ut(x) + b)
        xn = smw.apply(alpha * xh - a_s @ xh + b)
        x = (1.0 - opts.beta) * x + opts.beta * xn
        rr = float(np.linalg.norm(b - (a_s @ x + gamma * u_ut(x))) / bnorm)
        history.append(rr)
        if not np.isfinite(rr):
            raise NumericalBreakdownError("non-finite residual")
        if rr < opts.tol:
            converged = True
            break
    return x, SolveReport(
        converged=converged,
        iterations=it,
        residual_history=history,
        setup_seconds=setup,
        solve_seconds=time.perf_counter() - t1,
    )
