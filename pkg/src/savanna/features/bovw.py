"""Bag-of-visual-words descriptor: word counts over a window of the word map."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError
from ..raster import clamp_window
from .codebook import WordMap
from .vector import FeatureVector


def extract_bovw(wordmap: WordMap, centroid, window: int = 25, *, proposal_id: str = "") -> FeatureVector:
    """k-bin count histogram of word indices in the clamped window (mass window**2)."""
    cx = int(np.floor(centroid[0] + 0.5))
    cy = int(np.floor(centroid[1] + 0.5))
    if not (0 <= cx < wordmap.width and 0 <= cy < wordmap.height):
        raise InvalidArgumentError(
            f"centroid {centroid} falls outside word map {wordmap.image_id!r}"
        )
    patch = clamp_window(wordmap.words, cx, cy, window)
    counts = np.bincount(patch.ravel(), minlength=wordmap.k).astype(np.float64)
    return FeatureVector(proposal_id=proposal_id, kind="bovw", values=counts)


def bovw_matrix(wordmap: WordMap, centroids, window: int = 25) -> np.ndarray:
    if len(centroids) == 0:
        return np.empty((0, wordmap.k), dtype=np.float64)
    return np.stack([extract_bovw(wordmap, c, window).values for c in centroids])
