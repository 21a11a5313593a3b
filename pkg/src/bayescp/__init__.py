"""Online conformal prediction with prior-regularized empirical beliefs."""

from .core import DomainError, Prior, ScoreDomain, empirical_quantile, prior_cdf, quantile_loss
from .datagen import SequenceSpec, generate
from .engines import (
    ConstantSchedule,
    DiscountedBelief,
    ExactBelief,
    QuantizedBelief,
    SqrtSchedule,
    load_engine,
    step_size,
)
from .kernels import BACKEND
from .predictors import (
    BayesianPredictor,
    DiscountedPredictor,
    ERMPredictor,
    MultiOGDPredictor,
    OGDPredictor,
    PredictorRecord,
    QuantizedPredictor,
    make_predictor,
)
from .runner import EpisodeReport, monotonicity_scan, run_episode

__all__ = [
    "BACKEND",
    "BayesianPredictor",
    "ConstantSchedule",
    "DiscountedBelief",
    "DiscountedPredictor",
    "DomainError",
    "ERMPredictor",
    "EpisodeReport",
    "ExactBelief",
    "MultiOGDPredictor",
    "OGDPredictor",
    "Prior",
    "PredictorRecord",
    "QuantizedBelief",
    "QuantizedPredictor",
    "ScoreDomain",
    "SequenceSpec",
    "SqrtSchedule",
    "empirical_quantile",
    "generate",
    "load_engine",
    "make_predictor",
    "monotonicity_scan",
    "prior_cdf",
    "quantile_loss",
    "run_episode",
    "step_size",
]
