"""Solvers and verification tooling for nonmonotone inclusions 0 in (F+G)(x).

The library covers cohypomonotone and weak-MVI problem classes with
nonmonotonicity modulus rho anywhere below 1/L: anchored (Halpern) and
averaged (KM) outer loops around inexact resolvent computations, their
stochastic counterparts, and a randomized-level estimator for the
weak-MVI stochastic case, all with the exact inner-iteration budgets their
guarantees are priced against.  A benchmark CLI runs configured experiments,
emits CSV traces, and checks the residual bounds on analytically constructed
test problems.
"""

from .core import (
    Assumption,
    ComonoError,
    DimensionMismatch,
    InclusionProblem,
    MONOTONE,
    NumericsError,
    ParameterError,
    ProxOperator,
    ShiftedMap,
    SingularSystemError,
    SmoothMap,
    SolveReport,
    SolveRow,
    as_point,
    cohypomonotone,
    fbf_oracle_cost,
    make_shifted_map,
    weak_mvi,
)
from .inner import (
    InnerSolveResult,
    fbf_run,
    fbf_stochastic_run,
    mlmc_average,
    mlmc_enumerate_mean,
    mlmc_fbf,
)
from .metrics import (
    Certificate,
    PropertyReport,
    attach_residuals,
    best_iterate_by_residual,
    check_cocoercive_identity_minus_j,
    check_conic_nonexpansive,
    check_prox_firmly_nonexpansive,
    check_shifted_map_regularity,
    estimate_weak_mvi_rho,
    extract_certificate,
    property_suite,
    reference_resolvent,
    residual,
)
from .outer import (
    OuterParams,
    budget_halpern,
    budget_halpern_stochastic,
    budget_km,
    budgets_mlmc_km,
    halpern_solve,
    halpern_stochastic_solve,
    halpern_stochastic_solve_seeds,
    km_mlmc_solve,
    km_mlmc_solve_seeds,
    km_solve,
)
from .problems import (
    L1,
    RatioGameSpec,
    RotationSpec,
    make_affine,
    make_matrix_game,
    make_ratio_game,
    make_rotation,
    shipped_ratio_game,
    spectral_norm,
    with_gaussian_noise,
)
from .prox import (
    BoxSet,
    SimplexSet,
    box_prox,
    identity_prox,
    l1_prox,
    project_box,
    project_simplex,
    resolve_affine,
    simplex_product_prox,
    soft_threshold,
)
from .rng import substream

__version__ = "0.1.0"
