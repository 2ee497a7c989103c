"""Metrics, experiment protocols and the synthetic savanna generator."""

from .metrics import (
    Curve,
    ScoredExample,
    average_curves,
    curve_to_csv,
    pr_curve,
    recall_at_precision,
    roc_curve,
    scored_from_arrays,
)
from .synth import SynthParams, SyntheticDataset, synth_generate
from .experiments import (
    CellResult,
    DatasetSplit,
    ExperimentConfig,
    Period,
    PeriodSplit,
    UnbalancedConfig,
    UnbalancedResult,
    equalize_positive_counts,
    run_balanced_ablation,
    run_unbalanced_eval,
    split_by_period,
    split_dataset,
)

__all__ = [
    "Curve",
    "ScoredExample",
    "roc_curve",
    "pr_curve",
    "average_curves",
    "recall_at_precision",
    "curve_to_csv",
    "scored_from_arrays",
    "SynthParams",
    "SyntheticDataset",
    "synth_generate",
    "ExperimentConfig",
    "CellResult",
    "DatasetSplit",
    "UnbalancedConfig",
    "UnbalancedResult",
    "run_balanced_ablation",
    "run_unbalanced_eval",
    "split_dataset",
    "split_by_period",
    "Period",
    "PeriodSplit",
    "equalize_positive_counts",
]
