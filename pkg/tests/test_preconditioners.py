import numpy as np
import pytest

from altsplit.operators import LowRankUpdatedOperator
from altsplit.preconditioners import (
    Mode,
    build_product,
    build_shift_only,
    build_smw,
    build_symmetrized,
    build_unshifted,
    identity_preconditioner,
)
from altsplit.factorizations import NotPositiveDefiniteError, ic0
from altsplit.sparse_core import CsrMatrix


def make_op(n=14, k=3, gamma=2.0, seed=0, symmetric=True, spd=True):
    rng = np.random.Generator(np.random.Philox(seed))
    g = rng.standard_normal((n, n))
    if symmetric:
        a = g @ g.T + (n if spd else -n) * np.eye(n)
    else:
        a = g + n * np.eye(n)
    u = rng.standard_normal((n, k))
    return LowRankUpdatedOperator(CsrMatrix.from_dense(a), u, gamma), a, u


class TestSmw:
    def test_matches_dense_inverse(self):
        rng = np.random.Generator(np.random.Philox(1))
        n, k, alpha, gamma = 25, 4, 0.7, 3.0
        u = rng.standard_normal((n, k))
        smw = build_smw(u, alpha, gamma)
        m = alpha * np.eye(n) + gamma * (u @ u.T)
        r = rng.standard_normal(n)
        assert np.allclose(smw.apply(r), np.linalg.solve(m, r), atol=1e-11)

    def test_sparse_u(self):
        rng = np.random.Generator(np.random.Philox(2))
        n, k = 30, 5
        u = np.where(rng.random((n, k)) < 0.3, rng.standard_normal((n, k)), 0.0)
        smw = build_smw(CsrMatrix.from_dense(u), 0.5, 2.0)
        m = 0.5 * np.eye(n) + 2.0 * (u @ u.T)
        r = rng.standard_normal(n)
        assert np.allclose(smw.apply(r), np.linalg.solve(m, r), atol=1e-11)

    def test_reuse_across_rhs(self):
        rng = np.random.Generator(np.random.Philox(3))
        u = rng.standard_normal((10, 2))
        smw = build_smw(u, 1.0, 1.0)
        m = np.eye(10) + u @ u.T
        for _ in range(3):
            r = rng.standard_normal(10)
            assert np.allclose(smw.apply(r), np.linalg.solve(m, r), atol=1e-11)

    def test_rejects_nonpositive_parameters(self):
        with pytest.raises(ValueError):
            build_smw(np.ones((5, 1)), 0.0, 1.0)
        with pytest.raises(ValueError):
            build_smw(np.ones((5, 1)), 1.0, -2.0)


class TestProduct:
    def test_apply_is_exact_inverse(self):
        op, a, u = make_op(seed=4)
        alpha, gamma = 0.8, 2.0
        P = build_product(op, alpha)
        n = op.n
        # apply inverts the shift factor first, so the composed map is the
        # inverse of (alpha I + gamma U U^T)(A + alpha I)
        pmat = (alpha * np.eye(n) + gamma * (u @ u.T)) @ (a + alpha * np.eye(n))
        r = np.sin(np.arange(n))
        assert np.allclose(P.apply(r), np.linalg.solve(pmat, r), atol=1e-9)

    def test_inexact_uses_incomplete_factor(self):
        op, a, u = make_op(seed=5)
        alpha = 0.6
        P = build_product(op, alpha, Mode.INEXACT)
        f = ic0(CsrMatrix.from_dense(a + alpha * np.eye(op.n)))
        smw_inv = np.linalg.inv(alpha * np.eye(op.n) + 2.0 * (u @ u.T))
        r = np.cos(np.arange(op.n))
        want = f.solve(smw_inv @ r)
        assert np.allclose(P.apply(r), want, atol=1e-9)

    def test_exact_rejects_nonsymmetric(self):
        op, _, _ = make_op(seed=6, symmetric=False)
        with pytest.raises(ValueError, match="inexact"):
            build_product(op, 1.0, Mode.EXACT)

    def test_inexact_nonsymmetric_works(self):
        op, a, u = make_op(seed=7, symmetric=False)
        P = build_product(op, 1.0, Mode.INEXACT)
        r = np.ones(op.n)
        z = P.apply(r)
        assert np.all(np.isfinite(z)) and np.linalg.norm(z) > 0


class TestSymmetrized:
    def test_spd_map(self):
        op, _, _ = make_op(seed=8)
        P = build_symmetrized(op, 0.9)
        m = P.assemble_dense_inverse_action()
        assert np.allclose(m, m.T, atol=1e-9)
        assert np.min(np.linalg.eigvalsh(0.5 * (m + m.T))) > 0

    def test_matches_explicit_form(self):
        op, a, u = make_op(seed=9)
        alpha, gamma, n = 0.7, 2.0, op.n
        P = build_symmetrized(op, alpha)
        # P^S = (P^T L) S (P^T L)^T with S the shift factor; invert densely
        l = P.sym_lower.to_dense()
        perm = P.sym_perm
        pm = np.eye(n)[:, perm] if perm is not None else np.eye(n)
        lfull = pm @ l  # row-permuted factor: A + alpha I = lfull lfull^T
        assert np.allclose(lfull @ lfull.T, a + alpha * np.eye(n), atol=1e-8)
        ps = lfull @ (alpha * np.eye(n) + gamma * (u @ u.T)) @ lfull.T
        r = np.sin(np.arange(n))
        assert np.allclose(P.apply(r), np.linalg.solve(ps, r), atol=1e-8)

    def test_rejects_nonsymmetric(self):
        op, _, _ = make_op(seed=10, symmetric=False)
        with pytest.raises(ValueError):
            build_symmetrized(op, 1.0)

    def test_inexact_variant_spd(self):
        op, _, _ = make_op(seed=11)
        P = build_symmetrized(op, 0.5, Mode.INEXACT)
        m = P.assemble_dense_inverse_action()
        assert np.allclose(m, m.T, atol=1e-9)
        assert np.min(np.linalg.eigvalsh(0.5 * (m + m.T))) > 0


class TestUnshiftedAndBaseline:
    def test_unshifted_exact_inverse(self):
        op, a, u = make_op(seed=12)
        alpha, gamma, n = 1.3, 2.0, op.n
        P = build_unshifted(op, alpha)
        pmat = (alpha * np.eye(n) + gamma * (u @ u.T)) @ a
        r = np.arange(n, dtype=float)
        assert np.allclose(P.apply(r), np.linalg.solve(pmat, r), atol=1e-8)

    def test_unshifted_requires_spd(self):
        op, _, _ = make_op(seed=13, spd=False)
        with pytest.raises(NotPositiveDefiniteError, match="shifted"):
            build_unshifted(op, 1.0)

    def test_shift_only_is_incomplete_shifted_solve(self):
        op, a, _ = make_op(seed=14)
        alpha = 0.4
        P = build_shift_only(op, alpha)
        f = ic0(CsrMatrix.from_dense(a + alpha * np.eye(op.n)))
        r = np.ones(op.n)
        assert np.allclose(P.apply(r), f.solve(r), atol=1e-10)

    def test_identity(self):
        P = identity_preconditioner(6)
        r = np.arange(6, dtype=float)
        assert np.array_equal(P.apply(r), r)


class TestScaledIdentity:
    def test_scaled_product_equals_scaled_parts(self):
        # building the product preconditioner on the diagonally scaled
        # operator must equal building it from the scaled parts directly
        op, a, u = make_op(seed=15)
        gamma, alpha = 2.0, 0.9
        ops = op.with_diagonal_scaling()
        P = build_product(ops, alpha)
        d = np.sqrt(np.diag(a + gamma * (u @ u.T)))
        a_s = a / np.outer(d, d)
        u_s = u / d[:, None]
        n = op.n
        pmat = (alpha * np.eye(n) + gamma * (u_s @ u_s.T)) @ (a_s + alpha * np.eye(n))
        r = np.sin(np.arange(n))
        assert np.allclose(P.apply(r), np.linalg.solve(pmat, r), atol=1e-9)
