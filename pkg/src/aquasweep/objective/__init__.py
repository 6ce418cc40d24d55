"""Training losses, evaluation metrics and the per-pixel depth fitter."""

from .features import FeatureExtractor
from .losses import (
    EmptyMaskWarning,
    LossWeights,
    boosting_loss,
    combined_mask,
    smoothness_loss,
    stage_losses,
    synthesis_loss,
)
from .metrics import METRIC_NAMES, eigen_metrics
from .fit import FitResult, StageMasks, build_loss, fit_depth

__all__ = [
    "EmptyMaskWarning",
    "FeatureExtractor",
    "FitResult",
    "LossWeights",
    "METRIC_NAMES",
    "StageMasks",
    "boosting_loss",
    "build_loss",
    "combined_mask",
    "eigen_metrics",
    "fit_depth",
    "smoothness_loss",
    "stage_losses",
    "synthesis_loss",
]
