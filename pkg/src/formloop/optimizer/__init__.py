from .spaces import DEFAULT_BOUNDS, ParameterConfiguration, SearchSpace, SpaceError, round_half_up
from .kernels import DimensionMismatch, matern52, matern52_matrix
from .gp import (
    GPModel,
    InsufficientData,
    SingularCovariance,
    fit_gp,
    gp_posterior,
    gp_posterior_batch,
    gp_posterior_cov,
    gp_posterior_gradient,
    log_marginal_likelihood,
    with_observations,
)
from .pareto import (
    BadReferencePoint,
    EmptyInput,
    ParetoFront,
    Staircase2D,
    dominates,
    hypervolume,
    non_dominated_indices,
    pareto_front,
    reference_point,
)
from .study import (
    OBJECTIVES,
    GenerationSettings,
    ObjectiveModel,
    ObjectiveSample,
    StudyState,
    StudyError,
    dump_results_table,
    fit_objective_models,
    load_warmstart_table,
)
from .acquisition import (
    AcquisitionError,
    ModelNotFitted,
    QNEHVI,
    acquisition_qnehvi,
    optimize_candidate,
    suggest_batch,
)
from .agent import ActiveLearningAgent, UmbrellaInactive

__all__ = [
    "ActiveLearningAgent",
    "AcquisitionError",
    "BadReferencePoint",
    "DEFAULT_BOUNDS",
    "DimensionMismatch",
    "EmptyInput",
    "GPModel",
    "GenerationSettings",
    "InsufficientData",
    "ModelNotFitted",
    "OBJECTIVES",
    "ObjectiveModel",
    "ObjectiveSample",
    "ParameterConfiguration",
    "ParetoFront",
    "QNEHVI",
    "SearchSpace",
    "SingularCovariance",
    "SpaceError",
    "Staircase2D",
    "StudyError",
    "StudyState",
    "UmbrellaInactive",
    "acquisition_qnehvi",
    "dominates",
    "dump_results_table",
    "fit_gp",
    "fit_objective_models",
    "gp_posterior",
    "gp_posterior_batch",
    "gp_posterior_cov",
    "gp_posterior_gradient",
    "hypervolume",
    "load_warmstart_table",
    "log_marginal_likelihood",
    "matern52",
    "matern52_matrix",
    "non_dominated_indices",
    "optimize_candidate",
    "pareto_front",
    "reference_point",
    "round_half_up",
    "suggest_batch",
    "with_observations",
]
