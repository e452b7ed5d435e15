import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from altsplit.sparse_core import (
    CsrMatrix,
    DimensionError,
    MatrixMarketError,
    mm_read,
    mm_write,
    spmv,
    tall_apply,
    two_norm_estimate,
)


def rand_sparse(n, m, density, seed):
    rng = np.random.Generator(np.random.Philox(seed))
    mask = rng.random((n, m)) < density
    return np.where(mask, rng.standard_normal((n, m)), 0.0)


class TestCsrMatrix:
    def test_from_dense_round_trip(self):
        a = rand_sparse(7, 5, 0.4, 1)
        m = CsrMatrix.from_dense(a)
        assert np.array_equal(m.to_dense(), a)

    def test_rejects_unsorted_columns(self):
        with pytest.raises(ValueError):
            CsrMatrix(2, 2, np.array([0, 2, 2]), np.array([1, 0]), np.array([1.0, 2.0]))

    def test_rejects_bad_offsets(self):
        with pytest.raises(ValueError):
            CsrMatrix(2, 2, np.array([0, 2, 1]), np.array([0, 1]), np.array([1.0, 2.0]))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            CsrMatrix.from_dense(np.array([[np.nan, 1.0], [0.0, 2.0]]))

    def test_from_coo_sums_duplicates(self):
        m = CsrMatrix.from_coo(2, 2, [0, 0, 1], [1, 1, 0], [1.0, 2.0, 5.0])
        assert m.to_dense()[0, 1] == 3.0
        assert m.nnz == 2

    def test_diagonal_and_transpose(self):
        a = rand_sparse(6, 6, 0.5, 2)
        m = CsrMatrix.from_dense(a)
        assert np.array_equal(m.diagonal(), np.diag(a))
        assert np.array_equal(m.transpose().to_dense(), a.T)

    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_spmv_matches_dense(self, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        n, m = int(rng.integers(1, 12)), int(rng.integers(1, 12))
        a = rand_sparse(n, m, 0.5, seed + 1)
        x = rng.standard_normal(m)
        y = rng.standard_normal(n)
        mat = CsrMatrix.from_dense(a)
        assert np.allclose(spmv(mat, x), a @ x, atol=1e-12)
        assert np.allclose(spmv(mat, y, transpose=True), a.T @ y, atol=1e-12)

    def test_spmv_dimension_error(self):
        m = CsrMatrix.identity(3)
        with pytest.raises(DimensionError):
            spmv(m, np.ones(4))

    def test_tall_apply_dense_and_sparse_agree(self):
        u = rand_sparse(10, 3, 0.6, 3)
        x = np.arange(3, dtype=float)
        y = np.arange(10, dtype=float)
        us = CsrMatrix.from_dense(u)
        assert np.allclose(tall_apply(us, x), tall_apply(u, x))
        assert np.allclose(
            tall_apply(us, y, transpose=True), tall_apply(u, y, transpose=True)
        )


class TestMatrixMarket:
    def test_round_trip_sparse(self, tmp_path):
        a = rand_sparse(9, 7, 0.3, 4)
        m = CsrMatrix.from_dense(a)
        p = tmp_path / "m.mtx"
        mm_write(m, p)
        back = mm_read(p)
        assert isinstance(back, CsrMatrix)
        assert np.allclose(back.to_dense(), a, atol=0)

    def test_round_trip_dense_vector(self, tmp_path):
        v = np.linspace(-3, 3, 11)
        p = tmp_path / "v.mtx"
        mm_write(v, p)
        back = mm_read(p)
        assert np.array_equal(back.ravel(), v)

    def test_symmetric_expansion(self, tmp_path):
        p = tmp_path / "s.mtx"
        p.write_text(
            "%%MatrixMarket matrix coordinate real symmetric\n"
            "3 3 4\n1 1 2.0\n2 1 -1.0\n2 2 2.0\n3 3 1.5\n"
        )
        m = mm_read(p)
        d = m.to_dense()
        assert d[0, 1] == d[1, 0] == -1.0
        assert np.allclose(d, d.T)

    def test_error_reports_line_number(self, tmp_path):
        p = tmp_path / "bad.mtx"
        p.write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 5 3.0\n")
        with pytest.raises(MatrixMarketError, match="line 3"):
            mm_read(p)

    def test_bad_banner(self, tmp_path):
        p = tmp_path / "bad.mtx"
        p.write_text("not a banner\n")
        with pytest.raises(MatrixMarketError, match="line 1"):
            mm_read(p)

    def test_scipy_reader_agrees(self, tmp_path):
        import scipy.io as sio

        a = rand_sparse(8, 8, 0.4, 5)
        p = tmp_path / "x.mtx"
        mm_write(CsrMatrix.from_dense(a), p)
        ours = mm_read(p).to_dense()
        theirs = sio.mmread(str(p)).toarray()
        assert np.allclose(ours, theirs, atol=0)


class TestNormEstimate:
    def test_matches_svd(self):
        a = rand_sparse(30, 12, 0.5, 6)
        est = two_norm_estimate(CsrMatrix.from_dense(a), tol=1e-10)
        assert est.converged
        assert est.value == pytest.approx(np.linalg.norm(a, 2), rel=1e-6)

    def test_dense_input(self):
        a = np.diag([3.0, 1.0, 0.5])
        est = two_norm_estimate(a, tol=1e-12)
        assert float(est) == pytest.approx(3.0, rel=1e-9)

    def test_deterministic(self):
        a = rand_sparse(20, 20, 0.3, 7)
        m = CsrMatrix.from_dense(a)
        e1 = two_norm_estimate(m)
        e2 = two_norm_estimate(m)
        assert e1.value == e2.value and e1.iterations == e2.iterations
