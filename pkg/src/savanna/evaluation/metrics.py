"""ROC and precision-recall curves with tie-grouped thresholds."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import InvalidArgumentError


@dataclass(frozen=True)
class ScoredExample:
    proposal_id: str
    score: float
    true_label: str  # animal | background


@dataclass(frozen=True)
class Curve:
    """Points are (threshold, x, y): roc -> (FPR, TPR), pr -> (recall, precision)."""

    kind: str  # roc | pr
    points: tuple[tuple[float, float, float], ...] = field(repr=False)
    auc: float


def _tie_grouped_counts(scored: Sequence[ScoredExample]):
    scores = np.array([s.score for s in scored], dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise InvalidArgumentError("scores must be finite")
    labels = np.array([s.true_label == "animal" for s in scored], dtype=bool)
    n_pos = int(labels.sum())
    n_neg = int((~labels).sum())
    if n_pos == 0 or n_neg == 0:
        raise InvalidArgumentError("need both labels to draw a curve")
    order = np.argsort(-scores, kind="stable")
    scores, labels = scores[order], labels[order]
    # Group equal scores into one threshold step.
    distinct = np.flatnonzero(np.diff(scores)) if scores.size > 1 else np.array([], dtype=int)
    boundaries = np.concatenate([distinct, [scores.size - 1]])
    tp = np.cumsum(labels)[boundaries].astype(np.float64)
    fp = np.cumsum(~labels)[boundaries].astype(np.float64)
    thresholds = scores[boundaries]
    return thresholds, tp, fp, n_pos, n_neg


def roc_curve(scored: Sequence[ScoredExample]) -> Curve:
    """ROC over all distinct thresholds (prediction rule: score >= threshold).

    Sentinels at +/-inf pin the (0, 0) and (1, 1) corners; AUC is the
    trapezoidal area under TPR vs FPR.
    """
    thresholds, tp, fp, n_pos, n_neg = _tie_grouped_counts(scored)
    points = [(math.inf, 0.0, 0.0)]
    points += [(float(t), float(f / n_neg), float(p / n_pos)) for t, p, f in zip(thresholds, tp, fp)]
    points.append((-math.inf, 1.0, 1.0))
    xs = np.array([p[1] for p in points])
    ys = np.array([p[2] for p in points])
    auc = float(np.trapezoid(ys, xs))
    return Curve(kind="roc", points=tuple(points), auc=auc)


def pr_curve(scored: Sequence[ScoredExample]) -> Curve:
    """Precision-recall with step-wise average precision as the AUC.

    AP = sum over threshold steps of (recall_k - recall_{k-1}) * precision_k,
    with no interpolation between steps.
    """
    thresholds, tp, fp, n_pos, n_neg = _tie_grouped_counts(scored)
    recall = tp / n_pos
    precision = tp / (tp + fp)
    points = [(math.inf, 0.0, 1.0)]
    points += [(float(t), float(r), float(p)) for t, r, p in zip(thresholds, recall, precision)]
    points.append((-math.inf, 1.0, float(n_pos / (n_pos + n_neg))))
    prev_r = 0.0
    ap = 0.0
    for r, p in zip(recall, precision):
        ap += (r - prev_r) * p
        prev_r = r
    return Curve(kind="pr", points=tuple(points), auc=float(ap))


def recall_at_precision(curve: Curve, min_precision: float) -> float:
    """Best recall among finite curve points with precision >= min_precision."""
    if curve.kind != "pr":
        raise InvalidArgumentError("recall_at_precision needs a pr curve")
    best = 0.0
    for t, r, p in curve.points:
        if math.isfinite(t) and p >= min_precision:
            best = max(best, r)
    return best


def _as_function_of_x(curve: Curve) -> tuple[np.ndarray, np.ndarray]:
    """Collapse the polyline to one best-y per distinct x for interpolation."""
    xs: dict[float, float] = {}
    for _, x, y in curve.points:
        if x not in xs or y > xs[x]:
            xs[x] = y
    keys = sorted(xs)
    return np.array(keys), np.array([xs[k] for k in keys])


def average_curves(curves: Sequence[Curve], grid: Sequence[float]) -> Curve:
    """Vertical averaging: interpolate each curve onto the grid, then mean."""
    curves = list(curves)
    if not curves:
        raise InvalidArgumentError("need at least one curve")
    kinds = {c.kind for c in curves}
    if len(kinds) > 1:
        raise InvalidArgumentError(f"cannot average mixed curve kinds: {sorted(kinds)}")
    kind = curves[0].kind
    grid = np.asarray(list(grid), dtype=np.float64)
    stack = []
    for c in curves:
        xs, ys = _as_function_of_x(c)
        stack.append(np.interp(grid, xs, ys))
    mean = np.mean(np.stack(stack), axis=0)
    points = tuple((math.nan, float(x), float(y)) for x, y in zip(grid, mean))
    if kind == "roc":
        auc = float(np.trapezoid(mean, grid))
    else:
        prev = 0.0
        auc = 0.0
        for x, y in zip(grid, mean):
            auc += (x - prev) * y
            prev = x
    return Curve(kind=kind, points=points, auc=auc)


def curve_to_csv(curve: Curve, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["threshold", "x", "y"])
        for t, x, y in curve.points:
            writer.writerow([t, x, y])


def curve_summary(curve: Curve, **extra) -> dict:
    return {"kind": curve.kind, "auc": curve.auc, "n_points": len(curve.points), **extra}


def save_summary_json(path: str | Path, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)


def scored_from_arrays(ids: Iterable[str], scores: Iterable[float], labels: Iterable[str]) -> list[ScoredExample]:
    return [
        ScoredExample(proposal_id=str(i), score=float(s), true_label=str(l))
        for i, s, l in zip(ids, scores, labels)
    ]
