"""Stratified patch sampling for codebook training."""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import InvalidArgumentError
from ..fusion import GroundTruthObject
from ..raster import RasterImage, clamp_window


def flatten_patch(patch: np.ndarray) -> np.ndarray:
    """Flatten a (w, w, 3) patch to a single vector.

    Order is fixed and load-bearing for persistence and word assignment:
    the full red plane in row-major order, then green, then blue.
    """
    return patch.transpose(2, 0, 1).reshape(-1).astype(np.float64)


def sample_patches(
    images: Sequence[RasterImage],
    ground_truth: Iterable[GroundTruthObject],
    n_total: int = 20000,
    n_positive: int = 5000,
    *,
    seed: int,
    window: int = 25,
) -> np.ndarray:
    """Draw patch centers stratified over animal and background pixels.

    ``n_positive`` centers are sampled uniformly (without replacement) from
    ground-truth pixel sets, the remainder uniformly from background
    pixels; each patch is flattened per :func:`flatten_patch`. Rows are
    ordered positives first. Ground truth must be expressed at the images'
    resolution.
    """
    if n_positive > n_total:
        raise InvalidArgumentError("n_positive cannot exceed n_total")
    images_by_id: Mapping[str, RasterImage] = {img.image_id: img for img in images}

    gt_masks = {iid: np.zeros((img.height, img.width), dtype=bool) for iid, img in images_by_id.items()}
    for obj in ground_truth:
        if obj.verified == "rejected" or obj.image_id not in gt_masks:
            continue
        px = obj.pixels
        gt_masks[obj.image_id][px[:, 1], px[:, 0]] = True

    image_order = sorted(images_by_id)
    pos_pool = []  # (image index, x, y)
    bg_pools = []
    for idx, iid in enumerate(image_order):
        mask = gt_masks[iid]
        w = mask.shape[1]
        pos_flat = np.flatnonzero(mask.ravel())
        bg_flat = np.flatnonzero(~mask.ravel())
        if pos_flat.size:
            pos_pool.append(np.column_stack([np.full(pos_flat.size, idx), pos_flat % w, pos_flat // w]))
        bg_pools.append(np.column_stack([np.full(bg_flat.size, idx), bg_flat % w, bg_flat // w]))

    pos_all = np.concatenate(pos_pool) if pos_pool else np.empty((0, 3), dtype=np.int64)
    if pos_all.shape[0] < n_positive:
        raise InvalidArgumentError(
            f"need {n_positive} animal pixels to host positive patches but only "
            f"{pos_all.shape[0]} exist (short by {n_positive - pos_all.shape[0]})"
        )
    bg_all = np.concatenate(bg_pools)
    n_background = n_total - n_positive
    if bg_all.shape[0] < n_background:
        raise InvalidArgumentError(
            f"need {n_background} background pixels but only {bg_all.shape[0]} exist"
        )

    rng = np.random.default_rng(seed)
    pos_pick = pos_all[rng.choice(pos_all.shape[0], size=n_positive, replace=False)]
    bg_pick = bg_all[rng.choice(bg_all.shape[0], size=n_background, replace=False)]
    centers = np.concatenate([pos_pick, bg_pick])

    dim = window * window * 3
    out = np.empty((n_total, dim), dtype=np.float64)
    for row, (img_idx, x, y) in enumerate(centers):
        img = images_by_id[image_order[img_idx]]
        out[row] = flatten_patch(clamp_window(img.pixels, int(x), int(y), window))
    return out
