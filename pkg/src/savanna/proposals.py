"""Object-proposal generation from shadow and edge cues.

Standing animals cast dark shadows (low HSV value); fur produces sharp
blue-channel edges. Both cues are thresholded, small regions discarded,
and region centroids become proposals. Nearby proposals are merged with
single-linkage clustering so one animal ends up with roughly one proposal.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._union_find import DisjointSet
from .errors import InvalidArgumentError
from .fusion import GroundTruthObject
from .raster import RasterImage, connected_components, sobel_blue, threshold, value_channel

PROPOSAL_CSV_HEADER = ["proposal_id", "image_id", "x", "y", "source", "label", "score"]


@dataclass(frozen=True)
class ProposalConfig:
    """Thresholds and geometry for proposal generation.

    ``merge_radius_cm`` is physical so the same config works at any working
    resolution; it converts to pixels through ``working_gsd_cm``.
    """

    value_threshold: float = 60.0
    sobel_threshold: float = 120.0
    min_area_px: int = 3
    merge_radius_cm: float = 60.0
    working_gsd_cm: float = 8.0
    connectivity: int = 8

    def __post_init__(self):
        if self.min_area_px < 1:
            raise InvalidArgumentError("min_area_px must be >= 1")
        if self.merge_radius_cm <= 0:
            raise InvalidArgumentError("merge_radius_cm must be > 0")
        if not 0 <= self.value_threshold <= 255:
            raise InvalidArgumentError("value_threshold must lie in [0, 255]")
        if self.sobel_threshold < 0:
            raise InvalidArgumentError("sobel_threshold must be >= 0")
        if self.connectivity not in (4, 8):
            raise InvalidArgumentError("connectivity must be 4 or 8")

    @property
    def merge_radius_px(self) -> float:
        return self.merge_radius_cm / self.working_gsd_cm


@dataclass(frozen=True)
class Proposal:
    """A candidate animal location at working resolution."""

    proposal_id: str
    image_id: str
    centroid: tuple[float, float]
    source: str  # shadow | edge | merged
    label: str = "unknown"  # unknown | animal | background
    score: float | None = None
    parents: tuple[str, ...] = ()


def _require_working_resolution(img: RasterImage, cfg: ProposalConfig) -> None:
    if abs(img.gsd_cm - cfg.working_gsd_cm) > 1e-9:
        raise InvalidArgumentError(
            f"image {img.image_id!r} is at {img.gsd_cm} cm/px but the config expects "
            f"{cfg.working_gsd_cm} cm/px; downsample first"
        )


def _centroid_proposals(img: RasterImage, mask: np.ndarray, cfg: ProposalConfig, source: str, prefix: str):
    props = []
    seq = 0
    for region in connected_components(mask, cfg.connectivity):
        if region.area < cfg.min_area_px:
            continue
        props.append(
            Proposal(
                proposal_id=f"{img.image_id}:{prefix}{seq}",
                image_id=img.image_id,
                centroid=region.centroid,
                source=source,
            )
        )
        seq += 1
    return props


def shadow_proposals(img: RasterImage, cfg: ProposalConfig) -> list[Proposal]:
    """Centroids of dark connected regions of the HSV value channel."""
    _require_working_resolution(img, cfg)
    mask = threshold(value_channel(img), cfg.value_threshold, "below")
    return _centroid_proposals(img, mask, cfg, "shadow", "s")


def edge_proposals(img: RasterImage, cfg: ProposalConfig) -> list[Proposal]:
    """Centroids of strong connected Sobel responses on the blue channel."""
    _require_working_resolution(img, cfg)
    mask = threshold(sobel_blue(img), cfg.sobel_threshold, "above")
    return _centroid_proposals(img, mask, cfg, "edge", "e")


def merge_proposals(props: Sequence[Proposal], cfg: ProposalConfig) -> list[Proposal]:
    """Single-linkage merge of proposals closer than the merge radius.

    Groups are the connected components of the proximity graph (distance
    strictly below ``merge_radius_cm``). A group of one passes through
    unchanged; larger groups are replaced by one proposal at the unweighted
    mean centroid with ``source="merged"`` and the member ids as parents.
    """
    props = list(props)
    if not props:
        return []
    image_ids = {p.image_id for p in props}
    if len(image_ids) > 1:
        raise InvalidArgumentError(f"proposals span multiple images: {sorted(image_ids)}")
    image_id = props[0].image_id

    pts = np.array([p.centroid for p in props], dtype=np.float64)
    limit_sq = (cfg.merge_radius_px) ** 2
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    ds = DisjointSet(len(props))
    ii, jj = np.nonzero(np.triu(d2 < limit_sq, k=1))
    for a, b in zip(ii.tolist(), jj.tolist()):
        ds.union(a, b)

    groups = sorted(ds.groups().values(), key=lambda members: members[0])
    merged: list[Proposal] = []
    seq = 0
    for members in groups:
        if len(members) == 1:
            merged.append(props[members[0]])
            continue
        centroid = pts[members].mean(axis=0)
        merged.append(
            Proposal(
                proposal_id=f"{image_id}:m{seq}",
                image_id=image_id,
                centroid=(float(centroid[0]), float(centroid[1])),
                source="merged",
                parents=tuple(props[m].proposal_id for m in members),
            )
        )
        seq += 1
    return merged


def generate_proposals(img: RasterImage, cfg: ProposalConfig) -> list[Proposal]:
    """shadow + edge proposals of one working-resolution image, merged."""
    return merge_proposals(shadow_proposals(img, cfg) + edge_proposals(img, cfg), cfg)


def label_proposals(
    props: Sequence[Proposal],
    ground_truth: Iterable[GroundTruthObject],
    cfg: ProposalConfig,
) -> list[Proposal]:
    """Label proposals against ground truth at the working resolution.

    A proposal is ``animal`` when its centroid lies strictly within
    ``merge_radius_cm`` of a ground-truth pixel of the same image
    (rejected objects never count), else ``background``.
    """
    gt_by_image: dict[str, list[np.ndarray]] = {}
    for obj in ground_truth:
        if obj.verified == "rejected":
            continue
        gt_by_image.setdefault(obj.image_id, []).append(obj.pixels.astype(np.float64))

    limit_px = cfg.merge_radius_px
    labeled = []
    for p in props:
        pools = gt_by_image.get(p.image_id)
        label = "background"
        if pools:
            c = np.array(p.centroid, dtype=np.float64)
            for pixels in pools:
                d2 = ((pixels - c) ** 2).sum(axis=1)
                if d2.size and float(d2.min()) < limit_px**2:
                    label = "animal"
                    break
        labeled.append(dataclasses.replace(p, label=label))
    return labeled


def save_proposals_csv(props: Iterable[Proposal], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(PROPOSAL_CSV_HEADER)
        for p in props:
            writer.writerow(
                [
                    p.proposal_id,
                    p.image_id,
                    f"{p.centroid[0]:.4f}",
                    f"{p.centroid[1]:.4f}",
                    p.source,
                    p.label,
                    "" if p.score is None else f"{p.score:.6f}",
                ]
            )


def load_proposals_csv(path: str | Path) -> list[Proposal]:
    props = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != PROPOSAL_CSV_HEADER:
            raise InvalidArgumentError(f"unexpected proposal CSV header: {header}")
        for row in reader:
            pid, image_id, x, y, source, label, score = row
            props.append(
                Proposal(
                    proposal_id=pid,
                    image_id=image_id,
                    centroid=(float(x), float(y)),
                    source=source,
                    label=label,
                    score=float(score) if score else None,
                )
            )
    return props
