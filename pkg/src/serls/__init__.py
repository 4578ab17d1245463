"""Score-engineered regression: constrained, penalized weighted least
squares, its robust (Huber) variant via iterative winsorization, and
Step I / Step II marginal-contribution reporting."""

from serls.basis import SplineSpec, bspline_basis
from serls.engineered import (
    EngineeredProblem,
    build_engineered_qp,
    fit_engineered_ls,
    fit_objective,
    score,
    weighted_sse,
)
from serls.errors import (
    DegenerateVarianceError,
    InfeasibleError,
    InvalidInputError,
    InvalidWeightsError,
    SerlsError,
    SolveError,
    UnknownCharacteristicError,
)
from serls.marginal import (
    MarginalReport,
    development_report,
    evaluate_on_sample,
    step1_marginal,
    step1_objective,
    step2_marginal,
)
from serls.model_core import (
    CharacteristicLayout,
    Coefficients,
    ConstraintSet,
    DesignMatrix,
    ObservationSet,
    PenaltySpec,
    assemble_design,
    normalize_weights,
)
from serls.qp import QpSolution, QuadraticProgram, kkt_residual, solve_qp
from serls.robust import (
    RobustConfig,
    RobustFitResult,
    fit_robust,
    huber_loss,
    huber_objective,
    robust_scale,
    weighted_median,
    winsorize_residuals,
)

__version__ = "0.1.0"

__all__ = [
    "CharacteristicLayout",
    "Coefficients",
    "ConstraintSet",
    "DegenerateVarianceError",
    "DesignMatrix",
    "EngineeredProblem",
    "InfeasibleError",
    "InvalidInputError",
    "InvalidWeightsError",
    "MarginalReport",
    "ObservationSet",
    "PenaltySpec",
    "QpSolution",
    "QuadraticProgram",
    "RobustConfig",
    "RobustFitResult",
    "SerlsError",
    "SolveError",
    "SplineSpec",
    "UnknownCharacteristicError",
    "assemble_design",
    "bspline_basis",
    "build_engineered_qp",
    "development_report",
    "evaluate_on_sample",
    "fit_engineered_ls",
    "fit_objective",
    "fit_robust",
    "huber_loss",
    "huber_objective",
    "kkt_residual",
    "normalize_weights",
    "robust_scale",
    "score",
    "solve_qp",
    "step1_marginal",
    "step1_objective",
    "step2_marginal",
    "weighted_median",
    "weighted_sse",
    "winsorize_residuals",
]
