"""Small input-validation helpers used by the estimators and pipeline ops."""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError


def check_positive(name: str, value) -> None:
    if not value > 0:
        raise InvalidArgumentError(f"{name} must be > 0, got {value!r}")


def check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")


def check_matrix(name: str, X, n_cols: int | None = None) -> np.ndarray:
    """Coerce to a 2-D float64 array and optionally pin the column count."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2-D, got shape {X.shape}")
    if n_cols is not None and X.shape[1] != n_cols:
        raise InvalidArgumentError(f"{name} must have {n_cols} columns, got {X.shape[1]}")
    return X


def check_vector(name: str, x, dim: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if dim is not None and x.shape[0] != dim:
        raise InvalidArgumentError(f"{name} must have dimension {dim}, got {x.shape[0]}")
    return x


def check_image_pixels(pixels) -> np.ndarray:
    """Validate an RGB pixel grid: (H, W, 3), uint8-representable."""
    arr = np.asarray(pixels)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidArgumentError(f"pixels must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidArgumentError("image must have positive width and height")
    if arr.dtype != np.uint8:
        if np.any(arr < 0) or np.any(arr > 255):
            raise InvalidArgumentError("channel values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def check_binary_labels(name: str, y) -> np.ndarray:
    """Coerce labels to {-1, +1} and require both classes to be present."""
    y = np.asarray(y)
    if y.dtype.kind in "UO":
        mapped = np.where(y == "animal", 1, -1)
        bad = ~np.isin(y, ("animal", "background"))
        if np.any(bad):
            raise InvalidArgumentError(f"{name} contains unknown labels: {set(y[bad])}")
        y = mapped
    y = y.astype(np.int64).ravel()
    if not np.all(np.isin(y, (-1, 1))):
        raise InvalidArgumentError(f"{name} must be +1/-1 (or animal/background)")
    if len(np.unique(y)) < 2:
        raise InvalidArgumentError(f"{name} must contain both classes")
    return y
