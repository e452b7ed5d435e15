"""Seeded desk-scale problem generators.

All randomness comes from numpy's Philox counter-based 64-bit generator,
keyed only by the user seed, so two calls with the same parameters produce
bit-identical outputs.

The fluid problems use a staggered MAC finite-difference grid (velocity
components on cell faces, pressure at cell centers) on the unit square
with lid-driven-cavity boundary conditions; they stand in for the finite
element saddle-point matrices the augmented Lagrangian systems come from.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as _sp

from .sparse_core import CsrMatrix

__all__ = [
    "ProblemSpec",
    "gen_stokes_mac",
    "gen_oseen_mac",
    "gen_random_spd_lowrank",
    "gen_kkt_schur",
    "gen_sparse_dense_ls",
]

KINDS = ("stokes_mac", "oseen_mac", "random_spd_lowrank", "kkt_schur", "sparse_dense_ls")


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}; choose from {KINDS}")

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "params": self.params}, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ProblemSpec":
        d = json.loads(text)
        return ProblemSpec(d["kind"], d.get("params", {}))


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


# ---------------------------------------------------------------------------
# MAC-grid incompressible flow
# ---------------------------------------------------------------------------

def _mac_layout(nx: int, ny: int):
    """Interior-face unknown numbering: u faces (nx-1, ny), then v faces
    (nx, ny-1).  Boundary faces carry Dirichlet data and are eliminated."""
    nu = (nx - 1) * ny
    nv = nx * (ny - 1)
    return nu, nv


def _vector_laplacian_mac(nx: int, ny: int) -> CsrMatrix:
    """5-point Laplacian (scaled by 1/h^2) acting on interior u and v face
    unknowns with Dirichlet walls; SPD by construction."""
    h2 = (1.0 / nx) ** 2
    nu, nv = _mac_layout(nx, ny)

    def block(ncols_f, nrows_f):
        # grid of faces ncols_f x nrows_f, homogeneous Dirichlet outside
        n = ncols_f * nrows_f
        rows, cols, vals = [], [], []
        for j in range(nrows_f):
            for i in range(ncols_f):
                p = j * ncols_f + i
                rows.append(p); cols.append(p); vals.append(4.0 / h2)
                for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    ii, jj = i + di, j + dj
                    if 0 <= ii < ncols_f and 0 <= jj < nrows_f:
                        rows.append(p)
                        cols.append(jj * ncols_f + ii)
                        vals.append(-1.0 / h2)
        return _sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()

    au = block(nx - 1, ny)
    av = block(nx, ny - 1)
    return CsrMatrix.from_scipy(_sp.block_diag([au, av]).tocsr())


def _divergence_mac(nx: int, ny: int) -> CsrMatrix:
    """Discrete divergence B (k = nx*ny pressure cells by n velocity faces),
    scaled by 1/h; boundary faces (zero velocity) are omitted."""
    h = 1.0 / nx
    nu, nv = _mac_layout(nx, ny)
    rows, cols, vals = [], [], []
    for j in range(ny):
        for i in range(nx):
            cell = j * nx + i
            # east/west interior u faces: u face index (i, j) sits between
            # cells i and i+1 in row j; interior faces i = 0..nx-2
            if i < nx - 1:  # east face
                rows.append(cell); cols.append(j * (nx - 1) + i); vals.append(1.0 / h)
            if i > 0:  # west face
                rows.append(cell); cols.append(j * (nx - 1) + i - 1); vals.append(-1.0 / h)
            if j < ny - 1:  # north face
                rows.append(cell); cols.append(nu + j * nx + i); vals.append(1.0 / h)
            if j > 0:  # south face
                rows.append(cell); cols.append(nu + (j - 1) * nx + i); vals.append(-1.0 / h)
    return CsrMatrix.from_scipy(
        _sp.coo_matrix((vals, (rows, cols)), shape=(nx * ny, nu + nv)).tocsr()
    )


def gen_stokes_mac(nx: int, ny: int) -> tuple[CsrMatrix, CsrMatrix, np.ndarray]:
    """Stokes-like MAC discretization: SPD vector Laplacian A, divergence B,
    and cell-area weight diagonal W = h^2."""
    if nx < 3 or ny < 3:
        raise ValueError("grid must be at least 3 x 3")
    a = _vector_laplacian_mac(nx, ny)
    b = _divergence_mac(nx, ny)
    w = np.full(nx * ny, (1.0 / nx) ** 2)
    return a, b, w


def _upwind_convection(nx, ny, wind_u, wind_v) -> _sp.csr_matrix:
    """First-order upwind discretization of w . grad acting on one face
    block; returns a matrix whose symmetric part is PSD."""
    h = 1.0 / nx

    def conv_block(ncols_f, nrows_f, xs, ys, component):
        n = ncols_f * nrows_f
        rows, cols, vals = [], [], []
        for j in range(nrows_f):
            for i in range(ncols_f):
                p = j * ncols_f + i
                wu = wind_u(xs[i], ys[j])
                wv = wind_v(xs[i], ys[j])
                # x-direction upwinding
                if wu >= 0:
                    rows.append(p); cols.append(p); vals.append(wu / h)
                    if i > 0:
                        rows.append(p); cols.append(p - 1); vals.append(-wu / h)
                else:
                    rows.append(p); cols.append(p); vals.append(-wu / h)
                    if i < ncols_f - 1:
                        rows.append(p); cols.append(p + 1); vals.append(wu / h)
                # y-direction upwinding
                if wv >= 0:
                    rows.append(p); cols.append(p); vals.append(wv / h)
                    if j > 0:
                        rows.append(p); cols.append(p - ncols_f); vals.append(-wv / h)
                else:
                    rows.append(p); cols.append(p); vals.append(-wv / h)
                    if j < nrows_f - 1:
                        rows.append(p); cols.append(p + ncols_f); vals.append(wv / h)
        return _sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()

    # u faces at (i+1) * h in x, (j + 1/2) * h in y
    xs_u = [(i + 1) * h for i in range(nx - 1)]
    ys_u = [(j + 0.5) * h for j in range(ny)]
    # v faces at (i + 1/2) * h in x, (j+1) * h in y
    xs_v = [(i + 0.5) * h for i in range(nx)]
    ys_v = [(j + 1) * h for j in range(ny - 1)]
    cu = conv_block(nx - 1, ny, xs_u, ys_u, "u")
    cv = conv_block(nx, ny - 1, xs_v, ys_v, "v")
    return _sp.block_diag([cu, cv]).tocsr()


def gen_oseen_mac(
    nx: int, ny: int, nu: float, wind: str = "recirculating_vortex"
) -> tuple[CsrMatrix, CsrMatrix, np.ndarray]:
    """Oseen-like MAC discretization: A = nu * Laplacian + upwind convection
    with a divergence-free recirculating wind; symmetric part of A is PD."""
    if nx < 3 or ny < 3:
        raise ValueError("grid must be at least 3 x 3")
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    if wind not in ("recirculating_vortex", "zero"):
        raise ValueError(f"unknown wind field {wind!r}")
    lap = _vector_laplacian_mac(nx, ny).to_scipy() * nu
    if wind == "zero":
        a = lap
    else:
        # classic recirculating vortex on [-1, 1]^2 mapped to the unit square
        def wu(x, y):
            X, Y = 2 * x - 1, 2 * y - 1
            return 2 * Y * (1 - X * X)

        def wv(x, y):
            X, Y = 2 * x - 1, 2 * y - 1
            return -2 * X * (1 - Y * Y)

        a = lap + _upwind_convection(nx, ny, wu, wv)
    b = _divergence_mac(nx, ny)
    w = np.full(nx * ny, (1.0 / nx) ** 2)
    return CsrMatrix.from_scipy(a.tocsr()), b, w


# ---------------------------------------------------------------------------
# synthetic algebraic families
# ---------------------------------------------------------------------------

def gen_random_spd_lowrank(
    n: int, k: int, cond_target: float = 100.0, seed: int = 0
) -> tuple[CsrMatrix, np.ndarray]:
    """Banded SPD matrix with prescribed condition number plus a dense
    unit-column low-rank factor.

    A = G D G^T where D is a log-spaced positive diagonal with
    max/min = cond_target and G is a product of seeded adjacent-plane
    rotations, so the spectrum (hence the condition number) is exact and
    the matrix stays banded.
    """
    if not 1 <= k < n:
        raise ValueError("need 1 <= k < n")
    if cond_target < 1:
        raise ValueError("cond_target must be >= 1")
    rng = _rng(seed)
    d = np.logspace(-np.log10(cond_target), 0.0, n)
    a = np.diag(d)
    angles = rng.uniform(0.1, 1.4, size=n - 1)
    for i in range(n - 1):
        c, s = np.cos(angles[i]), np.sin(angles[i])
        g = np.eye(2)
        g[0, 0], g[0, 1], g[1, 0], g[1, 1] = c, -s, s, c
        a[i:i + 2, :] = g @ a[i:i + 2, :]
        a[:, i:i + 2] = a[:, i:i + 2] @ g.T
    a[np.abs(a) < 1e-300] = 0.0
    u = rng.standard_normal((n, k))
    u /= np.linalg.norm(u, axis=0, keepdims=True)
    return CsrMatrix.from_dense(a, tol=0.0), u


def gen_kkt_schur(
    n: int, k: int, seed: int = 0
) -> tuple[CsrMatrix, CsrMatrix, np.ndarray, np.ndarray]:
    """SPD Hessian-like H (shifted 1D Laplacian), sparse full-row-rank
    constraint Jacobian C, and positive diagonal z, lambda with spread
    1e-2 .. 1e2."""
    if not 1 <= k < n:
        raise ValueError("need 1 <= k < n")
    rng = _rng(seed)
    h = _sp.diags(
        [-np.ones(n - 1), 2.0 * np.ones(n) + 0.5, -np.ones(n - 1)], [-1, 0, 1]
    ).tocsr()
    # sparse random C with a staggered identity block guaranteeing row rank
    density = min(1.0, 4.0 / n)
    mask = rng.random((k, n)) < density
    c = np.where(mask, rng.standard_normal((k, n)), 0.0)
    for i in range(k):
        c[i, i * (n // k)] += 2.0
    z = 10.0 ** rng.uniform(-2, 2, size=k)
    lam = 10.0 ** rng.uniform(-2, 2, size=k)
    return (
        CsrMatrix.from_scipy(h),
        CsrMatrix.from_dense(c),
        z,
        lam,
    )


def gen_sparse_dense_ls(
    m1: int, k: int, n: int, density: float = 0.1, seed: int = 0,
    rank_deficient: bool = False,
) -> tuple[CsrMatrix, np.ndarray, np.ndarray]:
    """Sparse block B1 ((m1) x n), dense block B2 (k x n) and right-hand
    side c of length m1 + k.

    Full-rank mode adds a scaled identity into B1's leading rows so
    B = [B1; B2] has full column rank; rank-deficient mode duplicates
    B1's first column instead, making A = B1^T B1 singular.
    """
    if m1 < n or k < 1 or n < 2:
        raise ValueError("need m1 >= n, k >= 1, n >= 2")
    rng = _rng(seed)
    mask = rng.random((m1, n)) < density
    b1 = np.where(mask, rng.standard_normal((m1, n)), 0.0)
    if rank_deficient:
        b1[:, 1] = b1[:, 0]
    else:
        b1[:n, :] += 0.5 * np.eye(n)
    b2 = rng.standard_normal((k, n))
    c = rng.standard_normal(m1 + k)
    return CsrMatrix.from_dense(b1), b2, c
