import numpy as np
import pytest

from altsplit.operators import LowRankUpdatedOperator
from altsplit.preconditioners import build_product, build_symmetrized
from altsplit.sparse_core import CsrMatrix
from altsplit.spectra import (
    Spectrum,
    alpha_heuristic,
    bound_mu,
    bound_re_lower,
    bound_symm_interval,
    bounds_report,
    eig_general,
    eig_kernel_at,
    eig_kernel_u,
    eig_symmetric,
    iteration_matrix_radius,
    preconditioned_spectrum,
    rayleigh_lambda,
    rho_upper_and_alpha_star,
)


def make_op(n=20, k=3, gamma=2.0, seed=0, symmetric=True):
    rng = np.random.Generator(np.random.Philox(seed))
    g = rng.standard_normal((n, n))
    a = g @ g.T + n * np.eye(n) if symmetric else g + n * np.eye(n)
    u = rng.standard_normal((n, k))
    return LowRankUpdatedOperator(CsrMatrix.from_dense(a), u, gamma), a, u


def scaled_product_spectrum(op, alpha):
    """Eigenvalues of P^{-1} A_g with the 1/(2 alpha) scalar retained."""
    sp = preconditioned_spectrum(op, build_product(op, alpha))
    return 2.0 * alpha * sp.eigenvalues


class TestEigSymmetric:
    def test_diag(self):
        assert np.allclose(eig_symmetric(np.diag([3.0, 1.0, 2.0])), [1, 2, 3])

    def test_2x2_closed_form(self):
        assert np.allclose(eig_symmetric(np.array([[2.0, 1.0], [1.0, 2.0]])), [1, 3])

    def test_trace_and_determinant(self):
        rng = np.random.Generator(np.random.Philox(1))
        g = rng.standard_normal((50, 50))
        a = g @ g.T + 50 * np.eye(50)
        w = eig_symmetric(a)
        assert np.sum(w) == pytest.approx(np.trace(a), rel=1e-10)
        logdet = 2 * np.sum(np.log(np.diag(np.linalg.cholesky(a))))
        assert np.sum(np.log(w)) == pytest.approx(logdet, rel=1e-8)

    def test_rejects_nonsymmetric(self):
        with pytest.raises(ValueError):
            eig_symmetric(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestEigGeneral:
    def test_rotation(self):
        s = eig_general(np.array([[0.0, 1.0], [-1.0, 0.0]]))
        got = sorted(s.eigenvalues, key=lambda z: z.imag)
        assert np.allclose(got, [-1j, 1j], atol=1e-12)

    def test_diag(self):
        s = eig_general(np.diag([2.0, 3.0]))
        assert np.allclose(np.sort(s.real), [2, 3]) and np.allclose(s.imag, 0)

    def test_companion_roots(self):
        # z^3 - 6 z^2 + 11 z - 6 = (z-1)(z-2)(z-3)
        c = np.array([[6.0, -11.0, 6.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        s = eig_general(c)
        assert np.allclose(np.sort(s.real), [1, 2, 3], atol=1e-8)
        assert np.max(np.abs(s.imag)) < 1e-8

    def test_transpose_same_multiset(self):
        rng = np.random.Generator(np.random.Philox(2))
        m = rng.standard_normal((15, 15))
        a = np.sort_complex(eig_general(m).eigenvalues)
        b = np.sort_complex(eig_general(m.T).eigenvalues)
        assert np.allclose(a, b, atol=1e-8)

    def test_conjugation_closed(self):
        rng = np.random.Generator(np.random.Philox(3))
        m = rng.standard_normal((12, 12))
        vals = eig_general(m).eigenvalues
        conj = np.sort_complex(np.conj(vals))
        assert np.allclose(np.sort_complex(vals), conj, atol=1e-8)


class TestPreconditionedSpectrum:
    def test_exact_inverse_gives_ones(self):
        op, a, u = make_op(seed=4)
        ag = op.assemble_dense()

        class ExactInverse:
            kind = "identity"
            n = op.n

            def apply(self, r):
                return np.linalg.solve(ag, r)

        s = preconditioned_spectrum(op, ExactInverse())
        assert np.allclose(s.eigenvalues, 1.0, atol=1e-10)

    def test_scalar_convention(self):
        # nearly-identity A with a vanishing low-rank part: the product
        # preconditioner with the scalar dropped has spectrum ~ 1/2 at
        # alpha=1, and ~1 once the 2*alpha scalar is restored
        n = 8
        op = LowRankUpdatedOperator(
            CsrMatrix.identity(n), np.full((n, 1), 1e-8), 1e-8
        )
        s = preconditioned_spectrum(op, build_product(op, 1.0))
        assert np.allclose(s.real, 0.5, atol=1e-6)
        assert np.allclose(2.0 * 1.0 * s.real, 1.0, atol=1e-6)

    def test_disk_containment(self):
        op, _, _ = make_op(seed=5)
        lam = scaled_product_spectrum(op, 0.8)
        assert np.max(np.abs(lam - 1.0)) < 1.0 + 1e-8

    def test_symmetrized_real(self):
        op, _, _ = make_op(seed=6)
        s = preconditioned_spectrum(op, build_symmetrized(op, 0.7))
        assert np.max(np.abs(s.imag)) == 0.0

    def test_csv_format(self, tmp_path):
        s = Spectrum(np.array([1 + 2j, 3 - 4j]))
        p = tmp_path / "s.csv"
        s.to_csv(p)
        text = p.read_bytes().decode()
        assert text.splitlines()[0] == "re,im"
        assert "\r" not in text
        assert text.splitlines()[1] == "1,2"


class TestIterationMatrix:
    def test_zero_at_matching_alpha(self):
        n = 6
        op = LowRankUpdatedOperator(
            CsrMatrix.identity(n), np.full((n, 1), 1e-10), 1e-10
        )
        assert iteration_matrix_radius(op, 1.0) == pytest.approx(0.0, abs=1e-8)

    def test_diag_closed_form(self):
        a = CsrMatrix.from_dense(np.diag([1.0, 4.0]))
        # U numerically negligible so the closed form max(|2-l|/(2+l)) applies
        op = LowRankUpdatedOperator(a, np.full((2, 1), 1e-10), 1e-10)
        assert iteration_matrix_radius(op, 2.0) == pytest.approx(1 / 3, abs=1e-8)

    def test_contraction_for_pd_symmetric_part(self):
        op, _, _ = make_op(seed=7, symmetric=False)
        assert iteration_matrix_radius(op, 1.5) < 1.0

    def test_radius_matches_spectrum_offset(self):
        # P^{-1} A_g = I - T_alpha up to similarity, so the farthest
        # eigenvalue from 1 equals the spectral radius of T_alpha
        op, _, _ = make_op(seed=8)
        alpha = 0.9
        lam = scaled_product_spectrum(op, alpha)
        rho = iteration_matrix_radius(op, alpha)
        assert np.max(np.abs(lam - 1.0)) == pytest.approx(rho, rel=1e-7)


class TestClosedFormBounds:
    def test_mu_trivial(self):
        assert bound_mu(1.0, 1.0, 2.0) == pytest.approx(0.5)

    def test_mu_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            bound_mu(-1.0, 1.0, 1.0)

    def test_re_lower_closed_form(self):
        assert bound_re_lower(1.0, 1.0, 1.0) == pytest.approx(8 / 17)

    def test_re_lower_vanishes_with_alpha(self):
        assert bound_re_lower(1e-12, 1.0, 1.0) < 1e-10

    def test_symm_interval_trivial(self):
        lo, hi = bound_symm_interval(1.0, 1.0, 1.0)
        assert lo == pytest.approx(0.5) and hi == pytest.approx(2.0)

    def test_symm_lo_equals_mu_for_symmetric(self):
        for alpha, gamma, lmin in [(0.3, 2.0, 0.4), (1.7, 0.5, 1.1)]:
            lo, _ = bound_symm_interval(alpha, gamma, lmin)
            assert lo == pytest.approx(bound_mu(alpha, gamma, 2 * lmin), rel=1e-12)

    def test_real_eigs_above_mu(self):
        op, a, u = make_op(n=40, seed=9, gamma=1.5)
        opn, _ = op.normalize(tol=1e-10)
        an = opn.A.to_dense()
        lam = 2.0 * 0.6 * preconditioned_spectrum(opn, build_product(opn, 0.6)).eigenvalues
        mu = bound_mu(0.6, opn.gamma, float(eig_symmetric(an + an.T)[0]))
        real = lam[np.abs(lam.imag) < 1e-10].real
        assert real.size and np.all(real >= mu - 1e-10)
        assert np.all(real < 2.0)

    def test_symm_interval_contains_symmetrized_spectrum(self):
        op, _, _ = make_op(n=30, seed=10)
        opn, _ = op.normalize(tol=1e-10)
        alpha = 0.8
        lam = 2.0 * alpha * preconditioned_spectrum(
            opn, build_symmetrized(opn, alpha)
        ).eigenvalues.real
        an = opn.A.to_dense()
        lmin = float(eig_symmetric(0.5 * (an + an.T))[0])
        lo, hi = bound_symm_interval(alpha, opn.gamma, lmin)
        assert np.all(lam > lo - 1e-10) and np.all(lam < hi + 1e-10)


class TestKernelFormulas:
    def test_eig_kernel_u_trivial(self):
        assert eig_kernel_u(3.0, 3.0) == pytest.approx(1.0)
        assert eig_kernel_u(1.0, 1.0) == pytest.approx(1.0)

    def test_kernel_u_gamma_independent(self):
        # x = e2 lies in Ker(U^T); predicted eigenvalue 2*5/(5+3) = 1.25
        # must appear for unrelated gamma values
        a = CsrMatrix.from_dense(np.diag([2.0, 5.0]))
        u = np.array([[1.0], [0.0]])
        for gamma in (0.5, 7.0):
            op = LowRankUpdatedOperator(a, u, gamma)
            lam = scaled_product_spectrum(op, 3.0)
            want = eig_kernel_u(5.0, 3.0)
            assert np.min(np.abs(lam - want)) < 1e-9

    def test_eig_kernel_at_trivial(self):
        assert eig_kernel_at(2.0, 6.0, 3.0) == pytest.approx(1.0)
        assert eig_kernel_at(1e14, 1.0, 1.0) == pytest.approx(2.0, abs=1e-10)

    def test_kernel_at_rejects_zero(self):
        with pytest.raises(ValueError):
            eig_kernel_at(0.0, 1.0, 1.0)

    def test_kernel_at_on_singular_a(self):
        # A singular with kernel vector e3; U has a component there, so the
        # A-independent eigenvalue formula applies to x = e3
        a = np.diag([2.0, 3.0, 0.0])
        u = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 2.0]])
        gamma, alpha = 1.5, 0.7
        op = LowRankUpdatedOperator(CsrMatrix.from_dense(a), u, gamma)
        lam = scaled_product_spectrum(op, alpha)
        want = eig_kernel_at(4.0, alpha, gamma)  # ||U^T e3||^2 = 4
        assert np.min(np.abs(lam - want)) < 1e-8


class TestRayleigh:
    def test_kernel_reduction(self):
        a = CsrMatrix.from_dense(np.diag([2.0, 5.0]))
        u = np.array([[1.0], [0.0]])
        op = LowRankUpdatedOperator(a, u, 4.0)
        x = np.array([0.0, 1.0])
        assert rayleigh_lambda(op, 3.0, x) == pytest.approx(eig_kernel_u(5.0, 3.0))

    def test_identity_alpha_one(self):
        n = 6
        rng = np.random.Generator(np.random.Philox(11))
        u = rng.standard_normal((n, 2))
        op = LowRankUpdatedOperator(CsrMatrix.identity(n), u, 2.0)
        x = rng.standard_normal(n)
        x /= np.linalg.norm(x)
        assert rayleigh_lambda(op, 1.0, x) == pytest.approx(1.0, abs=1e-10)

    def test_matches_real_eigenpair(self):
        op, a, u = make_op(n=12, seed=12)
        alpha = 0.9
        n = op.n
        pm = (alpha * np.eye(n) + op.gamma * (u @ u.T)) @ (a + alpha * np.eye(n)) / (
            2 * alpha
        )
        m = np.linalg.solve(pm, op.assemble_dense())
        w, v = np.linalg.eig(m)
        real = np.where(np.abs(w.imag) < 1e-12)[0]
        assert real.size
        i = int(real[0])
        x = np.real(v[:, i])
        x /= np.linalg.norm(x)
        assert rayleigh_lambda(op, alpha, x) == pytest.approx(
            float(w[i].real), abs=1e-8
        )

    def test_requires_unit_vector(self):
        op, _, _ = make_op(seed=13)
        with pytest.raises(ValueError):
            rayleigh_lambda(op, 1.0, np.ones(op.n))


class TestRhoUpper:
    def test_two_eigs(self):
        rho_fn, a_star = rho_upper_and_alpha_star(np.array([1.0, 4.0]))
        assert a_star == pytest.approx(2.0)
        assert rho_fn(2.0) == pytest.approx(1 / 3)

    def test_single_eig(self):
        rho_fn, a_star = rho_upper_and_alpha_star(np.array([1.0]))
        assert a_star == pytest.approx(1.0) and rho_fn(1.0) == 0.0

    def test_bounds_iteration_radius(self):
        op, a, u = make_op(n=25, seed=14)
        rho_fn, _ = rho_upper_and_alpha_star(eig_symmetric(a))
        for alpha in (0.3, 1.0, 2.0, 8.0, 30.0):
            assert iteration_matrix_radius(op, alpha) <= rho_fn(alpha) + 1e-10

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            rho_upper_and_alpha_star(np.array([0.0, 1.0]))


class TestAlphaHeuristic:
    def test_values(self):
        assert alpha_heuristic(1.0) == pytest.approx(1.0)
        assert alpha_heuristic(50.0) == pytest.approx(7.0711, abs=5e-5)
        assert alpha_heuristic(0.1) == pytest.approx(0.31623, abs=5e-6)

    def test_maximizes_mu(self):
        for gamma in (0.1, 1.0, 50.0):
            grid = np.geomspace(1e-3, 1e3, 400)
            mus = [bound_mu(al, gamma, 1.0) for al in grid]
            best = grid[int(np.argmax(mus))]
            ratio = np.log(best / alpha_heuristic(gamma))
            cell = np.log(grid[1] / grid[0])
            assert abs(ratio) <= cell + 1e-12


class TestBoundsReport:
    def test_fields_consistent(self):
        op, _, _ = make_op(n=18, seed=15)
        opn, _ = op.normalize(tol=1e-10)
        alpha = 0.8
        lam = Spectrum(2 * alpha * preconditioned_spectrum(
            opn, build_product(opn, alpha)
        ).eigenvalues)
        rep = bounds_report(opn, alpha, lam)
        assert rep.mu > 0
        assert rep.symm_interval[0] < rep.symm_interval[1]
        assert rep.min_re is not None and rep.min_re >= rep.mu - 1e-10
        assert rep.max_re < 2.0 + 1e-10
        d = rep.to_dict()
        assert d["alpha_heuristic"] == pytest.approx(np.sqrt(opn.gamma))
