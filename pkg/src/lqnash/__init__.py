"""Projection-free policy-gradient solvers for zero-sum LQ dynamic games."""

from .diagnostics import (
    HessianProbe,
    NashCertificate,
    comparison2_residual,
    comparison_residual,
    fd_gradient_check,
    hessian_g_action,
    hessian_probe,
    leader_value,
    nash_certificate,
)
from .errors import (
    ConfigError,
    CurvatureInit,
    DegenerateInputError,
    DimensionError,
    InfeasibleError,
    InitializationError,
    InnerOracleInit,
    InvariantViolation,
    LQNashError,
    NonConvergenceError,
    NotStabilizableInit,
    SingularityError,
    StabilityError,
)
from .game import (
    Assumption,
    GameInstance,
    GradientBundle,
    PolicyPair,
    ValueCertificate,
    check_assumption,
    closed_loop,
    cost,
    gare_gains,
    gare_residual,
    gradient_bundle,
    is_admissible,
    natural_gradients,
    o_matrix,
    value_certificate,
)
from .inner import InnerMethod, InnerReport, argmax_L, inner_solve, solve_lqr
from .outer import (
    Leader,
    NashSolution,
    OuterMethod,
    OuterTrace,
    SolverConfig,
    ng_outer,
    ng_outer_leader_k,
    qn_outer,
    solve_nash,
    validate_init_L,
)

__version__ = "0.1.0"
