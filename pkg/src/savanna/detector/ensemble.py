"""Exemplar-SVM construction, score calibration and the any-positive ensemble.

One linear SVM is trained per positive example against every negative (and,
by default, every other positive). Member scores are rescaled so each
exemplar scores exactly 1 on its own feature vector, making members
comparable; a sample is an animal when any member's calibrated score
exceeds the threshold.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..errors import CalibrationFailureError, InvalidArgumentError, TrainingFailureError
from ..features.vector import FeatureVector
from ..validation import check_matrix, check_vector
from .svm import LinearModel, train_linear_svm

_MAGIC = b"SVEE"
_VERSION = 1


@dataclass
class ExemplarModel:
    """A calibrated per-exemplar linear model."""

    base: LinearModel
    exemplar_id: str
    calibration_scale: float

    def calibrated_scores(self, X) -> np.ndarray:
        return self.calibration_scale * self.base.decision_function(X)


@dataclass(frozen=True)
class DetectionResult:
    proposal_id: str
    max_score: float
    best_exemplar_id: str
    predicted: str  # animal | background


def train_exemplar(
    x_e,
    negatives,
    c_value: float,
    weight_ratio: float = 1.0,
    *,
    exemplar_id: str = "",
    tol: float = 1e-6,
    max_epochs: int = 300,
    kkt_tol: float = 1e-4,
) -> ExemplarModel:
    """Train one exemplar against a negative pool, then calibrate.

    The positive class weight is ``len(negatives) * weight_ratio`` so the
    single positive balances the aggregate hinge mass of the negatives.
    A raw exemplar score <= 0 after training is a calibration failure:
    the exemplar is hopeless and the caller may drop it.
    """
    x_e = check_vector("exemplar", x_e)
    negatives = check_matrix("negatives", negatives, n_cols=x_e.shape[0])
    if negatives.shape[0] == 0:
        raise InvalidArgumentError("negatives must be non-empty")
    X = np.vstack([x_e[None, :], negatives])
    y = np.concatenate([[1], -np.ones(negatives.shape[0], dtype=np.int64)])
    model = train_linear_svm(
        X,
        y,
        c_value,
        class_weights=(negatives.shape[0] * weight_ratio, 1.0),
        tol=tol,
        max_epochs=max_epochs,
        kkt_tol=kkt_tol,
    )
    raw = float(model.decision_function(x_e))
    if raw <= 0:
        raise CalibrationFailureError(exemplar_id)
    return ExemplarModel(base=model, exemplar_id=exemplar_id, calibration_scale=1.0 / raw)


@dataclass(frozen=True)
class EnsembleConfig:
    """Knobs for building an exemplar ensemble."""

    c_value: float = 1.0
    weight_ratio: float = 1.0
    other_positives_as_negatives: bool = True
    kkt_tol: float = 1e-4
    max_epochs: int = 300
    fingerprint: str = ""


class ExemplarEnsemble(ClassifierMixin, BaseEstimator):
    """Ensemble of calibrated exemplar SVMs behind a fit/predict surface.

    ``fit`` expects features ``X`` and labels ``y`` (+1/-1 or
    animal/background); every positive row becomes one member. Fitted
    attributes: ``members_`` (list of :class:`ExemplarModel`) and
    ``dropped_`` (exemplar ids that failed calibration).
    """

    def __init__(
        self,
        c_value: float = 1.0,
        weight_ratio: float = 1.0,
        other_positives_as_negatives: bool = True,
        threshold: float = 0.0,
        kkt_tol: float = 1e-4,
        max_epochs: int = 300,
        fingerprint: str = "",
    ):
        self.c_value = c_value
        self.weight_ratio = weight_ratio
        self.other_positives_as_negatives = other_positives_as_negatives
        self.threshold = threshold
        self.kkt_tol = kkt_tol
        self.max_epochs = max_epochs
        self.fingerprint = fingerprint

    def fit(self, X, y, proposal_ids: Sequence[str] | None = None):
        X = check_matrix("X", X)
        y = np.asarray(y)
        labels = np.where((y == 1) | (y == "animal"), 1, -1)
        pos_idx = np.flatnonzero(labels == 1)
        neg_idx = np.flatnonzero(labels == -1)
        if proposal_ids is None:
            proposal_ids = [f"x{i}" for i in range(X.shape[0])]
        self.fit_pools(
            X[pos_idx],
            X[neg_idx],
            positive_ids=[proposal_ids[i] for i in pos_idx],
        )
        return self

    def fit_pools(self, positives, negatives, positive_ids: Sequence[str] | None = None):
        """Build one member per positive row against the negative pool."""
        positives = check_matrix("positives", positives)
        if positives.shape[0] < 1:
            raise InvalidArgumentError("need at least one positive example")
        negatives = check_matrix("negatives", negatives, n_cols=positives.shape[1])
        if positive_ids is None:
            positive_ids = [f"pos{i}" for i in range(positives.shape[0])]
        if len(positive_ids) != positives.shape[0]:
            raise InvalidArgumentError("positive_ids length must match positives")

        members: list[ExemplarModel] = []
        dropped: list[str] = []
        n_pos = positives.shape[0]
        for e in range(n_pos):
            if self.other_positives_as_negatives and n_pos > 1:
                others = np.delete(positives, e, axis=0)
                neg_e = np.vstack([negatives, others]) if negatives.size else others
            else:
                neg_e = negatives
            try:
                members.append(
                    train_exemplar(
                        positives[e],
                        neg_e,
                        self.c_value,
                        self.weight_ratio,
                        exemplar_id=str(positive_ids[e]),
                        kkt_tol=self.kkt_tol,
                        max_epochs=self.max_epochs,
                    )
                )
            except CalibrationFailureError:
                dropped.append(str(positive_ids[e]))
        if not members:
            raise TrainingFailureError("every exemplar failed calibration; no members survive")
        self.members_ = members
        self.dropped_ = dropped
        return self

    # -- prediction ----------------------------------------------------

    def _score_matrix(self, X) -> np.ndarray:
        X = check_matrix("X", X, n_cols=self.members_[0].base.w.shape[0])
        W = np.stack([m.base.w for m in self.members_])
        b = np.array([m.base.b for m in self.members_])
        scales = np.array([m.calibration_scale for m in self.members_])
        return (X @ W.T + b[None, :]) * scales[None, :]

    def decision_function(self, X) -> np.ndarray:
        """Max calibrated member score per row."""
        return self._score_matrix(X).max(axis=1)

    def predict(self, X) -> np.ndarray:
        scores = self.decision_function(X)
        return np.where(scores > self.threshold, "animal", "background")

    def detect(self, X, proposal_ids: Sequence[str] | None = None, threshold: float | None = None):
        """Full per-row detection detail (score, best exemplar, verdict)."""
        thr = self.threshold if threshold is None else threshold
        scores = self._score_matrix(X)
        best = scores.argmax(axis=1)  # ties resolve to the lowest member index
        if proposal_ids is None:
            proposal_ids = [f"x{i}" for i in range(scores.shape[0])]
        return [
            DetectionResult(
                proposal_id=str(proposal_ids[i]),
                max_score=float(scores[i, best[i]]),
                best_exemplar_id=self.members_[best[i]].exemplar_id,
                predicted="animal" if scores[i, best[i]] > thr else "background",
            )
            for i in range(scores.shape[0])
        ]

    @property
    def dim(self) -> int:
        return int(self.members_[0].base.w.shape[0])

    # -- persistence ----------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Little-endian binary: header (version, member count, dim, training
        scalars, fingerprint), then per member (exemplar_id, calibration
        scale, bias, weight row)."""
        members = self.members_
        dim = self.dim
        fp = self.fingerprint.encode("utf-8")
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(struct.pack("<III", _VERSION, len(members), dim))
            f.write(struct.pack("<ddB", self.c_value, self.weight_ratio, int(self.other_positives_as_negatives)))
            f.write(struct.pack("<I", len(fp)))
            f.write(fp)
            for m in members:
                ident = m.exemplar_id.encode("utf-8")
                f.write(struct.pack("<I", len(ident)))
                f.write(ident)
                f.write(struct.pack("<dd", m.calibration_scale, m.base.b))
                f.write(m.base.w.astype("<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "ExemplarEnsemble":
        with open(path, "rb") as f:
            if f.read(4) != _MAGIC:
                raise InvalidArgumentError("not an ensemble file")
            version, count, dim = struct.unpack("<III", f.read(12))
            if version != _VERSION:
                raise InvalidArgumentError(f"unsupported ensemble version {version}")
            c_value, weight_ratio, flag = struct.unpack("<ddB", f.read(17))
            (fp_len,) = struct.unpack("<I", f.read(4))
            fingerprint = f.read(fp_len).decode("utf-8")
            members = []
            for _ in range(count):
                (id_len,) = struct.unpack("<I", f.read(4))
                ident = f.read(id_len).decode("utf-8")
                scale, b = struct.unpack("<dd", f.read(16))
                w = np.frombuffer(f.read(8 * dim), dtype="<f8").copy()
                members.append(
                    ExemplarModel(
                        base=LinearModel(w=w, b=b, c_value=c_value),
                        exemplar_id=ident,
                        calibration_scale=scale,
                    )
                )
        ens = cls(
            c_value=c_value,
            weight_ratio=weight_ratio,
            other_positives_as_negatives=bool(flag),
            fingerprint=fingerprint,
        )
        ens.members_ = members
        ens.dropped_ = []
        return ens


def build_ensemble(
    positives,
    negatives,
    config: EnsembleConfig | None = None,
    positive_ids: Sequence[str] | None = None,
) -> ExemplarEnsemble:
    """One calibrated member per positive row; drops hopeless exemplars."""
    config = config or EnsembleConfig()
    ens = ExemplarEnsemble(
        c_value=config.c_value,
        weight_ratio=config.weight_ratio,
        other_positives_as_negatives=config.other_positives_as_negatives,
        kkt_tol=config.kkt_tol,
        max_epochs=config.max_epochs,
        fingerprint=config.fingerprint,
    )
    return ens.fit_pools(positives, negatives, positive_ids=positive_ids)


def ensemble_predict(ens: ExemplarEnsemble, x, threshold: float = 0.0) -> DetectionResult:
    """Detection detail for a single feature vector (or FeatureVector)."""
    if isinstance(x, FeatureVector):
        pid, values = x.proposal_id, x.values
    else:
        pid, values = "", x
    values = check_vector("x", values, dim=ens.dim)
    return ens.detect(values[None, :], proposal_ids=[pid], threshold=threshold)[0]
