"""Rank-based, semiparametric-efficient shape-matrix estimation.

Estimates normalized scatter ("shape") matrices of real or complex
elliptically distributed data by a one-step correction of a robust
preliminary estimate, driven by rank statistics of the squared radii.
Includes the elliptical sampling model, robust preliminary estimators,
efficiency bounds and a Monte Carlo harness.
"""

from .matops import (
    Constraint,
    MatrixField,
    NotPositiveDefiniteError,
    ShapeMatrix,
)
from .elliptical import (
    Dataset,
    DegenerateObservationError,
    DensityGenerator,
    GeneratorKind,
    make_generator,
    sample_contaminated,
    sample_es,
    sample_outlier,
)
from .scores import (
    ScoreFunction,
    score_from_generator,
    t_score,
    van_der_waerden_score,
)
from .estimators import (
    ConvergenceError,
    PreliminaryEstimate,
    huber,
    renormalize,
    scm,
    tyler_joint,
)
from .restimator import (
    REstimateReport,
    REstimatorConfig,
    clairvoyant_estimate,
    r_estimate,
)
from .bounds import BoundReport, alpha0, cscrb, sfim_shape
from .harness import ExperimentSpec, Scenario, mse_index, run_scenario

__version__ = "0.1.0"

__all__ = [
    "Constraint", "MatrixField", "ShapeMatrix", "NotPositiveDefiniteError",
    "Dataset", "DensityGenerator", "GeneratorKind", "DegenerateObservationError",
    "make_generator", "sample_es", "sample_contaminated", "sample_outlier",
    "ScoreFunction", "van_der_waerden_score", "t_score", "score_from_generator",
    "PreliminaryEstimate", "ConvergenceError", "scm", "tyler_joint", "huber",
    "renormalize",
    "REstimatorConfig", "REstimateReport", "r_estimate", "clairvoyant_estimate",
    "BoundReport", "alpha0", "sfim_shape", "cscrb",
    "ExperimentSpec", "Scenario", "mse_index", "run_scenario",
    "__version__",
]
