"""The z-score + unit-l2 normalization chain.

Statistics come from the training matrix only (population standard
deviation, 1/N). Constant columns are centered and their std treated as 1,
so they come out all-zero rather than NaN.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..errors import InvalidArgumentError
from ..validation import check_matrix


@dataclass(frozen=True)
class NormalizationStats:
    """Per-dimension train-set mean and (zero-adjusted) standard deviation."""

    mean: np.ndarray = field(repr=False)
    std: np.ndarray = field(repr=False)

    @property
    def stats_id(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.mean).tobytes())
        h.update(np.ascontiguousarray(self.std).tobytes())
        return h.hexdigest()[:12]


class FeatureNormalizer(TransformerMixin, BaseEstimator):
    """Fit z-score statistics on the training matrix, then unit-l2 rows."""

    def fit(self, X, y=None):
        X = check_matrix("train matrix", X)
        if X.shape[0] == 0:
            raise InvalidArgumentError("train matrix is empty")
        mean = X.mean(axis=0)
        std = X.std(axis=0)  # population (1/N) convention
        std = np.where(std == 0.0, 1.0, std)
        self.stats_ = NormalizationStats(mean=mean, std=std)
        return self

    def transform(self, X) -> np.ndarray:
        X = check_matrix("matrix", X, n_cols=self.stats_.mean.shape[0])
        z = (X - self.stats_.mean) / self.stats_.std
        norms = np.linalg.norm(z, axis=1)
        zero = norms == 0.0
        if np.any(zero):
            warnings.warn(f"{int(zero.sum())} all-zero rows left unnormalized")
        z[~zero] = z[~zero] / norms[~zero, None]
        return z


def normalize_features(train: np.ndarray, *others: np.ndarray):
    """Normalize the train matrix and any further matrices with train stats.

    Returns ``(train_normalized, *others_normalized, stats)``.
    """
    normalizer = FeatureNormalizer().fit(train)
    out = [normalizer.transform(train)]
    out.extend(normalizer.transform(m) for m in others)
    out.append(normalizer.stats_)
    return tuple(out)
