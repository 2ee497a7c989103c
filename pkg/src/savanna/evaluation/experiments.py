"""Experiment protocols: balanced ablation grid, unbalanced ensemble run,
and acquisition-period splits."""

from __future__ import annotations

import dataclasses
import datetime as _dt
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..detector import EnsembleConfig, build_ensemble, cross_validate_c, train_linear_svm
from ..errors import InvalidArgumentError
from ..features import combine_matrices, normalize_features
from ..fusion import GroundTruthObject
from ..pipeline import (
    build_feature_bank,
    merge_feature_banks,
    proposals_for_dataset,
    to_working_resolution,
    train_dataset_codebook,
)
from ..proposals import Proposal, ProposalConfig
from ..raster import RasterImage
from .metrics import Curve, average_curves, pr_curve, recall_at_precision, roc_curve, scored_from_arrays
from .synth import SyntheticDataset

DEFAULT_C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
ROC_GRID = tuple(np.linspace(0.0, 1.0, 101))


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid and protocol knobs for the balanced ablation."""

    feature_kinds: tuple[str, ...] = ("hoc", "bovw", "combined")
    k_values: tuple[int, ...] = (100,)
    gsd_values: tuple[float, ...] = (8.0,)
    cells: tuple[tuple[str, int, float], ...] | None = None  # explicit (kind, k, gsd) list
    repeats: int = 5
    balanced: bool = True
    seed: int = 0
    c_grid: tuple[float, ...] = DEFAULT_C_GRID
    train_fraction: float = 0.7
    cv_folds: int = 5
    n_patches: int = 20000
    n_positive_patches: int = 5000
    window: int = 25
    bins: int = 10

    def grid_cells(self) -> list[tuple[str, int, float]]:
        if self.cells is not None:
            return [(kind, int(k), float(g)) for kind, k, g in self.cells]
        return [(kind, k, g) for kind in self.feature_kinds for k in self.k_values for g in self.gsd_values]

    def __post_init__(self):
        if not self.feature_kinds:
            raise InvalidArgumentError("feature_kinds must be non-empty")
        kinds = set(self.feature_kinds) | {c[0] for c in (self.cells or ())}
        unknown = kinds - {"hoc", "bovw", "combined"}
        if unknown:
            raise InvalidArgumentError(f"unknown feature kinds: {sorted(unknown)}")
        if self.repeats < 1:
            raise InvalidArgumentError("repeats must be >= 1")


@dataclass
class CellResult:
    kind: str
    k: int
    gsd_cm: float
    curve: Curve  # averaged over repeats
    repeat_curves: list[Curve]
    aucs: list[float]
    mean_auc: float
    chosen_c: list[float]


@dataclass(frozen=True)
class DatasetSplit:
    """An image-level slice of a dataset (images plus their ground truth)."""

    images: tuple[RasterImage, ...]
    ground_truth: tuple[GroundTruthObject, ...] = field(repr=False)

    @property
    def image_ids(self) -> set[str]:
        return {img.image_id for img in self.images}


def split_dataset(dataset: SyntheticDataset, train_fraction: float, seed: int) -> tuple[DatasetSplit, DatasetSplit]:
    """Assign each image (with all its animals) entirely to train or test."""
    ids = sorted(img.image_id for img in dataset.images)
    rng = np.random.default_rng(seed)
    rng.shuffle(ids)
    n_train = int(round(len(ids) * train_fraction))
    train_ids = set(ids[:n_train])
    by_id = {img.image_id: img for img in dataset.images}

    def build(selected: set[str]) -> DatasetSplit:
        imgs = tuple(by_id[i] for i in sorted(selected))
        gt = tuple(o for i in sorted(selected) for o in dataset.ground_truth.get(i, ()))
        return DatasetSplit(images=imgs, ground_truth=gt)

    return build(train_ids), build(set(ids) - train_ids)


def _normalized_matrices(kind, bank, train_ids, other_ids):
    """Raw rows -> per-type z-score (train stats) + unit norm (+ combination)."""
    train_h, train_b = bank.rows(kind, train_ids)
    other_h, other_b = bank.rows(kind, other_ids)
    if kind == "hoc":
        tr, ot, _ = normalize_features(train_h, other_h)
    elif kind == "bovw":
        tr, ot, _ = normalize_features(train_b, other_b)
    else:
        tr_h, ot_h, _ = normalize_features(train_h, other_h)
        tr_b, ot_b, _ = normalize_features(train_b, other_b)
        tr = combine_matrices(tr_h, tr_b)
        ot = combine_matrices(ot_h, ot_b)
    return tr, ot


def _pools(props: Sequence[Proposal]) -> tuple[list[Proposal], list[Proposal]]:
    pos = [p for p in props if p.label == "animal"]
    neg = [p for p in props if p.label == "background"]
    return pos, neg


def run_balanced_ablation(
    dataset: SyntheticDataset,
    cfg: ExperimentConfig,
    proposal_cfg: ProposalConfig | None = None,
) -> dict[tuple[str, int, float], CellResult]:
    """Balanced two-class protocol over the (features, k, gsd) grid.

    Per cell: the positive set is fixed; negatives are re-drawn per repeat
    with the same count as the positives; C comes from stratified k-fold
    cross-validation on the training side; per-repeat ROC curves are
    averaged vertically.
    """
    if not cfg.balanced:
        raise InvalidArgumentError("this runner implements the balanced protocol; see run_unbalanced_eval")
    all_gt = dataset.all_objects()
    train_split, test_split = split_dataset(dataset, cfg.train_fraction, cfg.seed)

    codebook_cache: dict[tuple[float, int], object] = {}
    prep_cache: dict[float, tuple] = {}

    def prep(gsd: float):
        if gsd not in prep_cache:
            pcfg = dataclasses.replace(proposal_cfg or ProposalConfig(), working_gsd_cm=gsd)
            working, gt_w = to_working_resolution(dataset.images, all_gt, gsd)
            props = proposals_for_dataset(working, pcfg, gt_w)
            prep_cache[gsd] = (working, gt_w, props)
        return prep_cache[gsd]

    def codebook_for(gsd: float, k: int):
        if (gsd, k) not in codebook_cache:
            working, gt_w, _ = prep(gsd)
            train_working = {i: working[i] for i in train_split.image_ids}
            train_gt = [o for o in gt_w if o.image_id in train_split.image_ids]
            codebook_cache[(gsd, k)] = train_dataset_codebook(
                train_working,
                train_gt,
                k=k,
                seed=cfg.seed,
                n_patches=cfg.n_patches,
                n_positive=cfg.n_positive_patches,
                window=cfg.window,
            )
        return codebook_cache[(gsd, k)]

    results: dict[tuple[str, int, float], CellResult] = {}
    for cell_idx, (kind, k, gsd) in enumerate(cfg.grid_cells()):
        working, gt_w, props = prep(gsd)
        train_props = [p for p in props if p.image_id in train_split.image_ids]
        test_props = [p for p in props if p.image_id in test_split.image_ids]
        train_pos, train_neg = _pools(train_props)
        test_pos, test_neg = _pools(test_props)
        if len(train_neg) < len(train_pos) or len(test_neg) < len(test_pos):
            raise InvalidArgumentError("not enough negatives to balance the positive set")

        # Draw every repeat's negatives up front so features are extracted once.
        draws = []
        for r in range(cfg.repeats):
            rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, cell_idx, r)))
            tr = rng.choice(len(train_neg), size=len(train_pos), replace=False)
            te = rng.choice(len(test_neg), size=len(test_pos), replace=False)
            draws.append(([train_neg[i] for i in tr], [test_neg[i] for i in te]))

        needed: dict[str, Proposal] = {p.proposal_id: p for p in train_pos + test_pos}
        for tr_neg, te_neg in draws:
            needed.update({p.proposal_id: p for p in tr_neg + te_neg})
        codebook = codebook_for(gsd, k) if kind in ("bovw", "combined") else None
        bank = build_feature_bank(
            working,
            list(needed.values()),
            kind=kind,
            codebook=codebook,
            window=cfg.window,
            bins=cfg.bins,
        )

        repeat_curves = []
        chosen = []
        for tr_neg, te_neg in draws:
            train_ids = [p.proposal_id for p in train_pos + tr_neg]
            test_ids = [p.proposal_id for p in test_pos + te_neg]
            y_train = np.array([1] * len(train_pos) + [-1] * len(tr_neg))
            y_test = ["animal"] * len(test_pos) + ["background"] * len(te_neg)
            X_train, X_test = _normalized_matrices(kind, bank, train_ids, test_ids)
            c = cross_validate_c(X_train, y_train, cfg.c_grid, folds=cfg.cv_folds, seed=cfg.seed)
            model = train_linear_svm(X_train, y_train, c)
            scores = model.decision_function(X_test)
            repeat_curves.append(roc_curve(scored_from_arrays(test_ids, scores, y_test)))
            chosen.append(c)

        averaged = average_curves(repeat_curves, ROC_GRID)
        aucs = [c.auc for c in repeat_curves]
        results[(kind, k, gsd)] = CellResult(
            kind=kind,
            k=k,
            gsd_cm=gsd,
            curve=averaged,
            repeat_curves=repeat_curves,
            aucs=aucs,
            mean_auc=float(np.mean(aucs)),
            chosen_c=chosen,
        )
    return results


@dataclass(frozen=True)
class UnbalancedConfig:
    feature_kind: str = "combined"
    k: int = 100
    gsd_cm: float = 8.0
    seed: int = 0
    max_positives: int | None = None
    window: int = 25
    bins: int = 10
    n_patches: int = 20000
    n_positive_patches: int = 5000
    proposal: ProposalConfig = field(default_factory=ProposalConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)


@dataclass
class UnbalancedResult:
    curve: Curve
    report: dict
    ensemble: object
    train_positive_ids: list[str]
    train_negative_ids: list[str]
    train_positive_X: np.ndarray
    train_negative_X: np.ndarray
    test_ids: list[str]
    test_X: np.ndarray
    test_labels: list[str]


def run_unbalanced_eval(train: DatasetSplit, test: DatasetSplit, cfg: UnbalancedConfig) -> UnbalancedResult:
    """Exemplar-ensemble run with the full negative pools.

    Train and test must be image-level disjoint. The positive pool can be
    capped (``max_positives``) to engineer a target class ratio while the
    negative pool stays complete; surplus positives are dropped entirely,
    never demoted to negatives.
    """
    overlap = train.image_ids & test.image_ids
    if overlap:
        raise InvalidArgumentError(f"train/test share images: {sorted(overlap)[:5]}")

    pcfg = dataclasses.replace(cfg.proposal, working_gsd_cm=cfg.gsd_cm)
    working_train, gt_train = to_working_resolution(train.images, train.ground_truth, cfg.gsd_cm)
    working_test, gt_test = to_working_resolution(test.images, test.ground_truth, cfg.gsd_cm)
    props_train = proposals_for_dataset(working_train, pcfg, gt_train)
    props_test = proposals_for_dataset(working_test, pcfg, gt_test)

    codebook = None
    if cfg.feature_kind in ("bovw", "combined"):
        codebook = train_dataset_codebook(
            working_train,
            gt_train,
            k=cfg.k,
            seed=cfg.seed,
            n_patches=cfg.n_patches,
            n_positive=cfg.n_positive_patches,
            window=cfg.window,
        )

    bank_train = build_feature_bank(
        working_train, props_train, kind=cfg.feature_kind, codebook=codebook, window=cfg.window, bins=cfg.bins
    )
    bank_test = build_feature_bank(
        working_test, props_test, kind=cfg.feature_kind, codebook=codebook, window=cfg.window, bins=cfg.bins
    )

    train_pos, train_neg = _pools(props_train)
    if cfg.max_positives is not None and len(train_pos) > cfg.max_positives:
        rng = np.random.default_rng(cfg.seed)
        keep = sorted(rng.choice(len(train_pos), size=cfg.max_positives, replace=False).tolist())
        train_pos = [train_pos[i] for i in keep]
    if not train_pos:
        raise InvalidArgumentError("no positive proposals in the training split")

    train_ids = [p.proposal_id for p in train_pos + train_neg]
    test_ids = [p.proposal_id for p in props_test]
    test_labels = [p.label for p in props_test]

    # Normalization statistics come from the full training pool only.
    X_train, X_test = _normalized_matrices(cfg.feature_kind, merge_feature_banks(bank_train, bank_test), train_ids, test_ids)
    n_pos = len(train_pos)
    ens = build_ensemble(
        X_train[:n_pos],
        X_train[n_pos:],
        cfg.ensemble,
        positive_ids=train_ids[:n_pos],
    )
    scores = ens.decision_function(X_test)
    curve = pr_curve(scored_from_arrays(test_ids, scores, test_labels))

    n_neg = len(train_neg)
    report = {
        "train_positives": n_pos,
        "train_negatives": n_neg,
        "train_ratio": f"1:{round(n_neg / n_pos)}" if n_pos else "n/a",
        "test_positives": sum(1 for l in test_labels if l == "animal"),
        "test_negatives": sum(1 for l in test_labels if l == "background"),
        "members": len(ens.members_),
        "dropped": list(ens.dropped_),
        "average_precision": curve.auc,
        "recall_at_precision_0.10": recall_at_precision(curve, 0.10),
    }
    return UnbalancedResult(
        curve=curve,
        report=report,
        ensemble=ens,
        train_positive_ids=train_ids[:n_pos],
        train_negative_ids=train_ids[n_pos:],
        train_positive_X=X_train[:n_pos],
        train_negative_X=X_train[n_pos:],
        test_ids=test_ids,
        test_X=X_test,
        test_labels=test_labels,
    )


@dataclass(frozen=True)
class Period:
    name: str
    start: _dt.time
    end: _dt.time


@dataclass
class PeriodSplit:
    subsets: dict[str, list[RasterImage]]
    unassigned: list[RasterImage]


def split_by_period(images: Sequence[RasterImage], periods: Sequence[Period]) -> PeriodSplit:
    """Assign each image to the first period containing its timestamp.

    Period definitions must not overlap; images without a timestamp (or
    outside every period) are reported as unassigned.
    """
    for i, a in enumerate(periods):
        for b in periods[i + 1 :]:
            if a.start <= b.end and b.start <= a.end:
                raise InvalidArgumentError(f"periods {a.name!r} and {b.name!r} overlap")
    subsets: dict[str, list[RasterImage]] = {p.name: [] for p in periods}
    unassigned: list[RasterImage] = []
    for img in images:
        t = img.acquired_at.time() if img.acquired_at else None
        for p in periods:
            if t is not None and p.start <= t <= p.end:
                subsets[p.name].append(img)
                break
        else:
            unassigned.append(img)
    return PeriodSplit(subsets=subsets, unassigned=unassigned)


def equalize_positive_counts(
    objects_by_period: Mapping[str, Sequence[GroundTruthObject]],
    seed: int = 0,
) -> dict[str, list[GroundTruthObject]]:
    """Subsample every period's positives down to the smallest period count."""
    if not objects_by_period:
        return {}
    floor = min(len(v) for v in objects_by_period.values())
    rng = np.random.default_rng(seed)
    out: dict[str, list[GroundTruthObject]] = {}
    for name in sorted(objects_by_period):
        objs = list(objects_by_period[name])
        if len(objs) > floor:
            keep = sorted(rng.choice(len(objs), size=floor, replace=False).tolist())
            objs = [objs[i] for i in keep]
        out[name] = objs
    return out
