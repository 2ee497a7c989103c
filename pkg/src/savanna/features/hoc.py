"""Histogram-of-colors descriptor over a window centered on a proposal."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError
from ..raster import RasterImage, clamp_window
from .vector import FeatureVector


def _bin_indices(values: np.ndarray, bins: int) -> np.ndarray:
    # Integer arithmetic keeps bin edges exact: floor(v / (256 / bins)).
    return np.minimum(values.astype(np.int64) * bins // 256, bins - 1)


def _window_center(img: RasterImage, centroid) -> tuple[int, int]:
    cx = int(np.floor(centroid[0] + 0.5))
    cy = int(np.floor(centroid[1] + 0.5))
    if not (0 <= cx < img.width and 0 <= cy < img.height):
        raise InvalidArgumentError(
            f"centroid {centroid} falls outside image {img.image_id!r} "
            f"({img.width}x{img.height})"
        )
    return cx, cy


def extract_hoc(
    img: RasterImage,
    centroid,
    window: int = 25,
    bins: int = 10,
    *,
    proposal_id: str = "",
) -> FeatureVector:
    """Per-channel intensity histograms over a window x window patch.

    Windows are clamped at image borders (edge pixels replicate), so each
    channel histogram always sums to window**2. Channels are concatenated
    R, G, B, giving ``3 * bins`` dimensions.
    """
    cx, cy = _window_center(img, centroid)
    patch = clamp_window(img.pixels, cx, cy, window)
    parts = [
        np.bincount(_bin_indices(patch[:, :, c].ravel(), bins), minlength=bins)
        for c in range(3)
    ]
    return FeatureVector(
        proposal_id=proposal_id,
        kind="hoc",
        values=np.concatenate(parts).astype(np.float64),
    )


def hoc_matrix(img: RasterImage, centroids, window: int = 25, bins: int = 10) -> np.ndarray:
    """Stack of raw HOC descriptors, one row per centroid."""
    if len(centroids) == 0:
        return np.empty((0, 3 * bins), dtype=np.float64)
    return np.stack([extract_hoc(img, c, window, bins).values for c in centroids])
