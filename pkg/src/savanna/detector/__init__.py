"""Linear SVM training and the calibrated exemplar ensemble."""

from .svm import LinearModel, cross_validate_c, train_linear_svm
from .ensemble import (
    DetectionResult,
    EnsembleConfig,
    ExemplarEnsemble,
    ExemplarModel,
    build_ensemble,
    ensemble_predict,
    train_exemplar,
)

__all__ = [
    "LinearModel",
    "train_linear_svm",
    "cross_validate_c",
    "ExemplarModel",
    "ExemplarEnsemble",
    "EnsembleConfig",
    "DetectionResult",
    "train_exemplar",
    "build_ensemble",
    "ensemble_predict",
]
