"""Flexible coordinate descent for composite convex problems ``f(x) + Psi(x)``."""
from .analysis import (
    BoundReport,
    ComplexityConstants,
    compute_chi,
    compute_delta,
    compute_vartheta,
    estimate_constants,
    iteration_bound,
    levelset_radius,
    one_step_ratios,
    validate_bound,
)
from .design import ColumnBlock, SparseDesignMatrix
from .driver import FcdConfig, IterationRecord, RunTrace, SolverError, UcdcConfig, fcd_run, ucdc_run
from .libsvm import parse_libsvm, write_libsvm
from .linesearch import LineSearchConfig, LineSearchError, backtrack, loss_delta
from .losses import LogisticLoss, QuadraticLoss, make_loss
from .model import (
    CoordinateLipschitz,
    DiagonalHessian,
    Identity,
    LimitedMemoryQN,
    PrincipalMinor,
    ScaledIdentity,
    SubproblemModel,
    build_model,
    make_strategy,
    model_value_delta,
    stationarity_residual,
)
from .problem import CompositeProblem, ProblemState, eval_F
from .regularizers import L1, ElasticNet, SquaredL2, Zero, make_regularizer
from .sampling import TauNiceSampler, subset_expectation_check
from .subsolver import (
    CertificateError,
    DirectionCertificate,
    InexactnessPolicy,
    check_certificates,
    solve_cg_smooth,
    solve_closed_form_diagonal,
    solve_proximal_inner,
)
from .synthetic import SyntheticRecipe, generate_synthetic

__version__ = "0.1.0"
