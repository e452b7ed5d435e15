"""Matrix-free iterative solvers and alternating-splitting preconditioners
for linear systems with a symmetric-positive-semidefinite-plus-low-rank
structure A + gamma*U*U^T."""

from .factorizations import (
    DenseCholesky,
    FactorizationError,
    IncompleteFactor,
    IncompleteKind,
    NotPositiveDefiniteError,
    SparseCholesky,
    dense_cholesky,
    ic0,
    ilu0,
    sparse_cholesky,
)
from .krylov import (
    NotSpdError,
    NumericalBreakdownError,
    SolveOptions,
    SolveReport,
    gmres_right,
    pcg,
    stationary_alternating,
)
from .operators import (
    LowRankUpdatedOperator,
    NormalizationRecord,
    from_augmented_lagrangian,
    from_kkt_schur,
    from_normal_equations,
)
from .ordering import amd_ordering, cholesky_fill_count
from .preconditioners import (
    Mode,
    Preconditioner,
    SmwSolver,
    build_product,
    build_shift_only,
    build_smw,
    build_symmetrized,
    build_unshifted,
    identity_preconditioner,
)
from .problems import (
    ProblemSpec,
    gen_kkt_schur,
    gen_oseen_mac,
    gen_random_spd_lowrank,
    gen_sparse_dense_ls,
    gen_stokes_mac,
)
from .sparse_core import (
    CsrMatrix,
    DimensionError,
    MatrixMarketError,
    NormEstimate,
    mm_read,
    mm_write,
    spmv,
    two_norm_estimate,
)
from .spectra import (
    BoundsReport,
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

__version__ = "0.1.0"
