"""Sparse/dense matrix kernels, Matrix Market I/O and 2-norm estimation.

CSR is the single sparse format used throughout.  Dense matrices and
vectors are plain float64 numpy arrays.  A "tall" matrix (the low-rank
factor U) is either a CsrMatrix or a 2-D ndarray; ``tall_apply``
dispatches on the representation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np
import scipy.sparse as _sp

__all__ = [
    "CsrMatrix",
    "TallMatrix",
    "DimensionError",
    "MatrixMarketError",
    "NormEstimate",
    "spmv",
    "tall_apply",
    "tall_shape",
    "mm_read",
    "mm_write",
    "two_norm_estimate",
]


class DimensionError(ValueError):
    """Incompatible operand dimensions."""


class MatrixMarketError(ValueError):
    """Malformed Matrix Market file; message names the offending line."""


@dataclass(frozen=True)
class CsrMatrix:
    """Compressed sparse row matrix, immutable after construction.

    Invariants (checked on construction): row_offsets nondecreasing with
    row_offsets[0] == 0 and row_offsets[-1] == nnz; column indices strictly
    increasing within each row (which also rules out duplicates).
    """

    nrows: int
    ncols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_offsets", np.asarray(self.row_offsets, dtype=np.int64))
        object.__setattr__(self, "col_indices", np.asarray(self.col_indices, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        ro, ci = self.row_offsets, self.col_indices
        if ro.shape != (self.nrows + 1,):
            raise ValueError("row_offsets must have length nrows+1")
        if ro[0] != 0 or ro[-1] != len(ci) or ro[-1] != len(self.values):
            raise ValueError("row_offsets endpoints inconsistent with nnz")
        if np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        if len(ci) and (ci.min() < 0 or ci.max() >= self.ncols):
            raise ValueError("column index out of range")
        if len(self.values) and not np.all(np.isfinite(self.values)):
            raise ValueError("matrix values must be finite")
        if len(ci) > 1:
            row_id = np.repeat(np.arange(self.nrows), np.diff(ro))
            same_row = row_id[1:] == row_id[:-1]
            bad = same_row & (np.diff(ci) <= 0)
            if np.any(bad):
                i = int(row_id[1:][bad][0])
                raise ValueError(f"row {i}: column indices not strictly increasing")

    # -- constructors -------------------------------------------------

    @staticmethod
    def from_scipy(m) -> "CsrMatrix":
        m = _sp.csr_matrix(m)
        m.sum_duplicates()
        m.sort_indices()
        m.eliminate_zeros()
        return CsrMatrix(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @staticmethod
    def from_dense(a, tol: float = 0.0) -> "CsrMatrix":
        a = np.asarray(a, dtype=np.float64)
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix values must be finite")
        mask = np.abs(a) > tol
        m = _sp.csr_matrix(np.where(mask, a, 0.0))
        return CsrMatrix.from_scipy(m)

    @staticmethod
    def from_coo(nrows, ncols, rows, cols, vals) -> "CsrMatrix":
        m = _sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols))
        return CsrMatrix.from_scipy(m)

    @staticmethod
    def identity(n: int) -> "CsrMatrix":
        return CsrMatrix.from_scipy(_sp.identity(n, format="csr"))

    @staticmethod
    def diag(d) -> "CsrMatrix":
        return CsrMatrix.from_scipy(_sp.diags(np.asarray(d, dtype=np.float64)).tocsr())

    # -- views --------------------------------------------------------

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    @cached_property
    def _scipy(self) -> _sp.csr_matrix:
        return _sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.nrows, self.ncols),
        )

    def to_scipy(self) -> _sp.csr_matrix:
        return self._scipy

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def transpose(self) -> "CsrMatrix":
        return CsrMatrix.from_scipy(self.to_scipy().T.tocsr())

    def diagonal(self) -> np.ndarray:
        return self.to_scipy().diagonal()

    def scale_values(self, s: float) -> "CsrMatrix":
        return CsrMatrix(self.nrows, self.ncols, self.row_offsets,
                         self.col_indices, self.values * s)

    def pattern_key(self) -> bytes:
        """Stable key identifying the sparsity structure (used for caching)."""
        return (
            self.nrows.to_bytes(8, "little")
            + self.ncols.to_bytes(8, "little")
            + self.row_offsets.tobytes()
            + self.col_indices.tobytes()
        )


TallMatrix = Union[CsrMatrix, np.ndarray]


def spmv(m: CsrMatrix, x: np.ndarray, transpose: bool = False) -> np.ndarray:
    """Matrix-vector product Mx (or M^T x).

    Summation order within each row is ascending column index, so results
    are deterministic across calls.
    """
    x = np.asarray(x, dtype=np.float64)
    need = m.nrows if transpose else m.ncols
    if x.shape != (need,):
        raise DimensionError(f"expected vector of length {need}, got {x.shape}")
    s = m.to_scipy()
    return (s.T @ x) if transpose else (s @ x)


def tall_shape(u: TallMatrix) -> tuple[int, int]:
    if isinstance(u, CsrMatrix):
        return (u.nrows, u.ncols)
    return u.shape


def tall_apply(u: TallMatrix, x: np.ndarray, transpose: bool = False) -> np.ndarray:
    """Apply a sparse-or-dense tall matrix (or its transpose) to a vector."""
    if isinstance(u, CsrMatrix):
        return spmv(u, x, transpose=transpose)
    u = np.asarray(u, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    need = u.shape[0] if transpose else u.shape[1]
    if x.shape != (need,):
        raise DimensionError(f"expected vector of length {need}, got {x.shape}")
    return (u.T @ x) if transpose else (u @ x)


def tall_to_dense(u: TallMatrix) -> np.ndarray:
    return u.to_dense() if isinstance(u, CsrMatrix) else np.asarray(u, dtype=np.float64)


# ---------------------------------------------------------------------------
# Matrix Market I/O
# ---------------------------------------------------------------------------

def mm_read(path) -> Union[CsrMatrix, np.ndarray]:
    """Read a Matrix Market file.

    Supports ``matrix coordinate real {general|symmetric}`` (returned as
    CsrMatrix, symmetric files expanded to full storage, duplicates summed)
    and ``matrix array real general`` (returned as a dense ndarray).
    """
    with open(path, "r") as f:
        lines = f.readlines()
    if not lines:
        raise MatrixMarketError("line 1: empty file")
    banner = lines[0].strip().split()
    if (
        len(banner) != 5
        or banner[0] != "%%MatrixMarket"
        or banner[1].lower() != "matrix"
    ):
        raise MatrixMarketError("line 1: malformed Matrix Market banner")
    fmt, fld, symm = banner[2].lower(), banner[3].lower(), banner[4].lower()
    if fld != "real":
        raise MatrixMarketError(f"line 1: unsupported field '{fld}' (only real)")
    if fmt not in ("coordinate", "array"):
        raise MatrixMarketError(f"line 1: unsupported format '{fmt}'")
    if symm not in ("general", "symmetric"):
        raise MatrixMarketError(f"line 1: unsupported symmetry '{symm}'")
    if fmt == "array" and symm != "general":
        raise MatrixMarketError("line 1: array format must be general")

    # skip comments
    ln = 1
    while ln < len(lines) and (lines[ln].startswith("%") or not lines[ln].strip()):
        ln += 1
    if ln >= len(lines):
        raise MatrixMarketError(f"line {ln + 1}: missing size line")
    size = lines[ln].split()
    try:
        if fmt == "coordinate":
            nr, nc, nnz = int(size[0]), int(size[1]), int(size[2])
        else:
            nr, nc = int(size[0]), int(size[1])
            nnz = nr * nc
    except (ValueError, IndexError):
        raise MatrixMarketError(f"line {ln + 1}: malformed size line") from None
    ln += 1

    if fmt == "array":
        vals = []
        for j in range(nnz):
            if ln + j >= len(lines):
                raise MatrixMarketError(f"line {ln + j + 1}: unexpected end of file")
            try:
                vals.append(float(lines[ln + j].split()[0]))
            except (ValueError, IndexError):
                raise MatrixMarketError(f"line {ln + j + 1}: malformed entry") from None
        return np.array(vals, dtype=np.float64).reshape((nc, nr)).T

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    for j in range(nnz):
        if ln + j >= len(lines):
            raise MatrixMarketError(f"line {ln + j + 1}: unexpected end of file")
        parts = lines[ln + j].split()
        try:
            i, jj, v = int(parts[0]), int(parts[1]), float(parts[2])
        except (ValueError, IndexError):
            raise MatrixMarketError(f"line {ln + j + 1}: malformed entry") from None
        if not (1 <= i <= nr and 1 <= jj <= nc):
            raise MatrixMarketError(f"line {ln + j + 1}: index out of range")
        rows[j], cols[j], vals[j] = i - 1, jj - 1, v
    if symm == "symmetric":
        off = rows != cols
        rows, cols = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
        )
        vals = np.concatenate([vals, vals[off]])
    return CsrMatrix.from_coo(nr, nc, rows, cols, vals)


def mm_write(m: Union[CsrMatrix, np.ndarray], path) -> None:
    """Write a matrix or vector as Matrix Market (coordinate for sparse,
    array for dense), 1-based indices, 17 significant digits."""
    if isinstance(m, CsrMatrix):
        if len(m.values) and not np.all(np.isfinite(m.values)):
            raise ValueError("matrix contains non-finite values")
        s = m.to_scipy().tocoo()
        with open(path, "w") as f:
            f.write("%%MatrixMarket matrix coordinate real general\n")
            f.write(f"{m.nrows} {m.ncols} {s.nnz}\n")
            for i, j, v in zip(s.row, s.col, s.data):
                f.write(f"{i + 1} {j + 1} {v:.17g}\n")
    else:
        a = np.asarray(m, dtype=np.float64)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix contains non-finite values")
        with open(path, "w") as f:
            f.write("%%MatrixMarket matrix array real general\n")
            f.write(f"{a.shape[0]} {a.shape[1]}\n")
            for j in range(a.shape[1]):
                for i in range(a.shape[0]):
                    f.write(f"{a[i, j]:.17g}\n")


# ---------------------------------------------------------------------------
# 2-norm estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormEstimate:
    value: float
    converged: bool
    iterations: int

    def __float__(self) -> float:
        return float(self.value)


def two_norm_estimate(m: TallMatrix, tol: float = 1e-6, maxit: int = 500) -> NormEstimate:
    """Estimate the spectral norm by power iteration on M^T M.

    The start vector is a fixed seeded pseudo-random vector, so the result
    is deterministic.  Convergence is measured by relative change of the
    estimate between sweeps.
    """
    nr, nc = tall_shape(m)
    rng = np.random.Generator(np.random.Philox(0x5EED_2_0))
    v = rng.standard_normal(nc)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise ValueError("degenerate start vector")
    v /= nv
    sigma = 0.0
    for it in range(1, maxit + 1):
        w = tall_apply(m, v)
        v_new = tall_apply(m, w, transpose=True)
        nrm = np.linalg.norm(v_new)
        if nrm == 0.0:
            # v in the null space; M may be zero
            return NormEstimate(0.0, True, it)
        new_sigma = np.sqrt(nrm)
        v = v_new / nrm
        if sigma > 0 and abs(new_sigma - sigma) <= tol * new_sigma:
            return NormEstimate(new_sigma, True, it)
        sigma = new_sigma
    return NormEstimate(sigma, False, maxit)
