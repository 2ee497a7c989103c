"""Dataset-level orchestration shared by the experiment harness and the service.

Images arrive at native resolution; everything downstream (proposals,
features, pools) runs at a working resolution reached by integer-factor
block averaging. Feature matrices here are raw counts; the z-score +
unit-norm chain is applied at training time with train-set statistics.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .features import Codebook, assign_words, bovw_matrix, hoc_matrix, sample_patches, train_codebook
from .features.codebook import _nearest_center
from .fusion import GroundTruthObject, rescale_object
from .proposals import Proposal, ProposalConfig, generate_proposals, label_proposals
from .raster import RasterImage, downsample


def working_factor(native_gsd_cm: float, working_gsd_cm: float) -> int:
    """Integer downsampling factor between two resolutions."""
    factor = working_gsd_cm / native_gsd_cm
    if abs(factor - round(factor)) > 1e-9 or factor < 1:
        raise InvalidArgumentError(
            f"working gsd {working_gsd_cm} must be an integer multiple of native gsd {native_gsd_cm}"
        )
    return int(round(factor))


def to_working_resolution(
    images: Sequence[RasterImage],
    ground_truth: Iterable[GroundTruthObject],
    working_gsd_cm: float,
) -> tuple[dict[str, RasterImage], list[GroundTruthObject]]:
    """Downsample images and rescale ground-truth pixel sets to match."""
    out_images: dict[str, RasterImage] = {}
    factors: dict[str, int] = {}
    for img in images:
        factor = working_factor(img.gsd_cm, working_gsd_cm)
        out_images[img.image_id] = downsample(img, factor) if factor > 1 else img
        factors[img.image_id] = factor
    out_gt = [
        rescale_object(obj, factors[obj.image_id])
        for obj in ground_truth
        if obj.image_id in factors
    ]
    return out_images, out_gt


def proposals_for_dataset(
    working_images: Mapping[str, RasterImage],
    cfg: ProposalConfig,
    ground_truth: Sequence[GroundTruthObject] | None = None,
) -> list[Proposal]:
    """Generate merged proposals for every image, labeled when truth is known."""
    props: list[Proposal] = []
    for iid in sorted(working_images):
        props.extend(generate_proposals(working_images[iid], cfg))
    if ground_truth is not None:
        props = label_proposals(props, ground_truth, cfg)
    return props


def group_by_image(props: Iterable[Proposal]) -> dict[str, list[Proposal]]:
    grouped: dict[str, list[Proposal]] = {}
    for p in props:
        grouped.setdefault(p.image_id, []).append(p)
    return grouped


def bovw_for_centroids(
    img: RasterImage,
    codebook: Codebook,
    centroids: Sequence,
    window: int = 25,
) -> np.ndarray:
    """Raw BoVW rows for a set of centroids in one image.

    Uses a dense word map when the windows would cover most of the image,
    otherwise assigns words only around each centroid. Both paths flatten
    patches identically, so they agree exactly.
    """
    k = codebook.centers_.shape[0]
    n = len(centroids)
    if n == 0:
        return np.empty((0, k), dtype=np.float64)
    h, w = img.height, img.width
    if n * window * window >= h * w:
        return bovw_matrix(assign_words(img, codebook, window), centroids, window)

    half = window // 2
    pad = np.pad(img.pixels, ((half, half), (half, half), (0, 0)), mode="edge")
    view = np.lib.stride_tricks.sliding_window_view(pad, (window, window), axis=(0, 1))
    centers = codebook.centers_
    out = np.empty((n, k), dtype=np.float64)
    offsets = np.arange(-half, half + 1)
    for i, c in enumerate(centroids):
        cx = int(np.floor(c[0] + 0.5))
        cy = int(np.floor(c[1] + 0.5))
        if not (0 <= cx < w and 0 <= cy < h):
            raise InvalidArgumentError(f"centroid {c} outside image {img.image_id!r}")
        xs = np.clip(cx + offsets, 0, w - 1)
        ys = np.clip(cy + offsets, 0, h - 1)
        patches = view[np.ix_(ys, xs)].reshape(window * window, -1).astype(np.float64)
        words = _nearest_center(patches, centers)
        out[i] = np.bincount(words, minlength=k)
    return out


@dataclass
class FeatureBank:
    """Raw per-proposal descriptors for one working-resolution dataset."""

    ids: list[str]
    hoc: np.ndarray | None
    bovw: np.ndarray | None
    k: int | None
    index: dict[str, int]

    def rows(self, kind: str, ids: Sequence[str]) -> tuple[np.ndarray | None, np.ndarray | None]:
        """(hoc rows, bovw rows) for the requested ids, per feature kind."""
        sel = np.array([self.index[i] for i in ids], dtype=np.int64)
        hoc = self.hoc[sel] if kind in ("hoc", "combined") else None
        bovw = self.bovw[sel] if kind in ("bovw", "combined") else None
        return hoc, bovw


def build_feature_bank(
    working_images: Mapping[str, RasterImage],
    props: Sequence[Proposal],
    *,
    kind: str = "combined",
    codebook: Codebook | None = None,
    window: int = 25,
    bins: int = 10,
) -> FeatureBank:
    if kind not in ("hoc", "bovw", "combined"):
        raise InvalidArgumentError(f"unknown feature kind {kind!r}")
    need_bovw = kind in ("bovw", "combined")
    if need_bovw and codebook is None:
        raise InvalidArgumentError("bovw features need a codebook")
    by_image = group_by_image(props)
    ids: list[str] = []
    hoc_rows = []
    bovw_rows = []
    for iid in sorted(by_image):
        img = working_images[iid]
        group = by_image[iid]
        centroids = [p.centroid for p in group]
        ids.extend(p.proposal_id for p in group)
        if kind in ("hoc", "combined"):
            hoc_rows.append(hoc_matrix(img, centroids, window, bins))
        if need_bovw:
            bovw_rows.append(bovw_for_centroids(img, codebook, centroids, window))
    hoc = np.concatenate(hoc_rows) if hoc_rows else None
    bovw = np.concatenate(bovw_rows) if bovw_rows else None
    return FeatureBank(
        ids=ids,
        hoc=hoc,
        bovw=bovw,
        k=codebook.centers_.shape[0] if need_bovw else None,
        index={pid: i for i, pid in enumerate(ids)},
    )


def merge_feature_banks(a: "FeatureBank", b: "FeatureBank") -> "FeatureBank":
    """Merge two banks with disjoint proposal ids into one lookup."""
    ids = a.ids + b.ids
    hoc = np.concatenate([a.hoc, b.hoc]) if a.hoc is not None else None
    bovw = np.concatenate([a.bovw, b.bovw]) if a.bovw is not None else None
    return FeatureBank(ids=ids, hoc=hoc, bovw=bovw, k=a.k, index={p: i for i, p in enumerate(ids)})


def train_dataset_codebook(
    working_images: Mapping[str, RasterImage],
    ground_truth: Sequence[GroundTruthObject],
    *,
    k: int,
    seed: int,
    n_patches: int = 20000,
    n_positive: int = 5000,
    window: int = 25,
    max_iter: int = 100,
    tol: float = 1e-4,
) -> Codebook:
    patches = sample_patches(
        list(working_images.values()),
        ground_truth,
        n_total=n_patches,
        n_positive=n_positive,
        seed=seed,
        window=window,
    )
    return train_codebook(patches, k=k, seed=seed, max_iter=max_iter, tol=tol)


def feature_fingerprint(kind: str, k: int | None, gsd_cm: float, stats_id: str = "", **extra) -> str:
    payload = {"kind": kind, "k": k, "gsd_cm": gsd_cm, "stats_id": stats_id, **extra}
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:12]
    return f"{kind}-k{k}-g{gsd_cm:g}-{digest}"
