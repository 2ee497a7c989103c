"""Fuse volunteer polygon annotations into verified ground-truth objects.

The consensus rule: a pixel belongs to the ground truth when at least half
of the volunteers who viewed the image tagged it, and any object supported
by a single volunteer is discarded. A later manual verification pass can
confirm or reject each object; rejected objects are excluded from exports.
"""

from __future__ import annotations

import dataclasses
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import InvalidArgumentError, NotFoundError
from .raster import connected_components

VERIFIED_STATES = ("unverified", "confirmed", "rejected")


@dataclass(frozen=True)
class VolunteerPolygon:
    """One polygon drawn by one volunteer around one animal."""

    image_id: str
    volunteer_id: str
    vertices: np.ndarray = field(repr=False)  # (N, 2) float (x, y)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise InvalidArgumentError("polygon needs at least 3 (x, y) vertices")
        object.__setattr__(self, "vertices", v)


def clamp_polygon(poly: VolunteerPolygon, width: int, height: int) -> VolunteerPolygon:
    """Clamp vertex coordinates into the image bounds (used on ingest)."""
    v = poly.vertices.copy()
    v[:, 0] = np.clip(v[:, 0], 0.0, float(width))
    v[:, 1] = np.clip(v[:, 1], 0.0, float(height))
    return dataclasses.replace(poly, vertices=v)


def _polygon_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def rasterize_polygon(poly: VolunteerPolygon, width: int, height: int) -> np.ndarray:
    """Pixels whose centers fall inside the polygon under the even-odd rule.

    Pixel (x, y) is sampled at its center (x + 0.5, y + 0.5). Returns an
    (N, 2) int array in scanline order; a degenerate (zero-area) polygon
    yields an empty set with a warning.
    """
    verts = poly.vertices
    if _polygon_area(verts) <= 1e-12:
        warnings.warn(f"degenerate polygon for volunteer {poly.volunteer_id!r} rasterizes to nothing")
        return np.empty((0, 2), dtype=np.int64)

    x0 = max(0, int(np.floor(verts[:, 0].min() - 0.5)))
    x1 = min(width - 1, int(np.ceil(verts[:, 0].max())))
    y0 = max(0, int(np.floor(verts[:, 1].min() - 0.5)))
    y1 = min(height - 1, int(np.ceil(verts[:, 1].max())))
    if x1 < x0 or y1 < y0:
        return np.empty((0, 2), dtype=np.int64)

    cx = np.arange(x0, x1 + 1, dtype=np.float64) + 0.5
    cy = np.arange(y0, y1 + 1, dtype=np.float64) + 0.5
    inside = np.zeros((cy.size, cx.size), dtype=bool)
    n = verts.shape[0]
    for i in range(n):
        xa, ya = verts[i]
        xb, yb = verts[(i + 1) % n]
        if ya == yb:
            continue  # horizontal edges never cross a horizontal ray boundary
        crosses_row = (ya <= cy[:, None]) != (yb <= cy[:, None])  # (rows, 1)
        x_int = xa + (cy[:, None] - ya) * (xb - xa) / (yb - ya)
        inside ^= crosses_row & (cx[None, :] < x_int)
    ys, xs = np.nonzero(inside)
    return np.column_stack([xs + x0, ys + y0]).astype(np.int64)


@dataclass(frozen=True)
class ConsensusMap:
    """Per-pixel count of distinct volunteers whose polygons cover the pixel."""

    image_id: str
    tag_count: np.ndarray = field(repr=False)  # (H, W) int
    viewer_count: int

    @property
    def height(self) -> int:
        return self.tag_count.shape[0]

    @property
    def width(self) -> int:
        return self.tag_count.shape[1]


def build_consensus(
    image_id: str,
    polys: Iterable[VolunteerPolygon],
    viewer_count: int,
    width: int,
    height: int,
) -> ConsensusMap:
    """Count, per pixel, how many distinct volunteers tagged it.

    Multiple polygons by the same volunteer count once per pixel.
    """
    polys = list(polys)
    for p in polys:
        if p.image_id != image_id:
            raise InvalidArgumentError(f"polygon image_id {p.image_id!r} does not match {image_id!r}")
    volunteers = sorted({p.volunteer_id for p in polys})
    if viewer_count < len(volunteers):
        raise InvalidArgumentError(
            f"viewer_count {viewer_count} is below the {len(volunteers)} distinct volunteers seen"
        )
    tag = np.zeros((height, width), dtype=np.int32)
    for vol in volunteers:
        covered = np.zeros((height, width), dtype=bool)
        for p in polys:
            if p.volunteer_id != vol:
                continue
            px = rasterize_polygon(p, width, height)
            if px.size:
                covered[px[:, 1], px[:, 0]] = True
        tag += covered
    return ConsensusMap(image_id=image_id, tag_count=tag, viewer_count=viewer_count)


@dataclass(frozen=True)
class GroundTruthObject:
    """One fused animal annotation: a connected pixel set plus its support."""

    object_id: str
    image_id: str
    pixels: np.ndarray = field(repr=False)  # (N, 2) int (x, y)
    centroid: tuple[float, float]
    supporting_volunteers: int
    verified: str = "unverified"

    def __post_init__(self):
        if self.verified not in VERIFIED_STATES:
            raise InvalidArgumentError(f"verified must be one of {VERIFIED_STATES}")
        if self.supporting_volunteers < 2:
            raise InvalidArgumentError("ground-truth objects need support from at least 2 volunteers")

    @property
    def area(self) -> int:
        return int(self.pixels.shape[0])


def extract_objects(cmap: ConsensusMap) -> list[GroundTruthObject]:
    """Ground-truth objects from a consensus map.

    Keeps pixels where ``2 * tag_count >= viewer_count``, groups them with
    8-connectivity, and drops any component whose strongest support is a
    single volunteer.
    """
    if cmap.viewer_count < 3:
        raise InvalidArgumentError(f"viewer_count must be >= 3, got {cmap.viewer_count}")
    mask = (2 * cmap.tag_count >= cmap.viewer_count) & (cmap.tag_count > 0)
    objects = []
    seq = 0
    for region in connected_components(mask, connectivity=8):
        support = int(cmap.tag_count[region.pixels[:, 1], region.pixels[:, 0]].max())
        if support <= 1:
            continue
        objects.append(
            GroundTruthObject(
                object_id=f"{cmap.image_id}:gt{seq:03d}",
                image_id=cmap.image_id,
                pixels=region.pixels,
                centroid=region.centroid,
                supporting_volunteers=support,
            )
        )
        seq += 1
    return objects


def verify_objects(
    objects: Iterable[GroundTruthObject],
    decisions: Mapping[str, str],
) -> list[GroundTruthObject]:
    """Apply confirm/reject decisions; unknown object ids raise NotFoundError."""
    objects = list(objects)
    known = {o.object_id for o in objects}
    for oid, decision in decisions.items():
        if oid not in known:
            raise NotFoundError(f"unknown object_id {oid!r}")
        if decision not in ("confirmed", "rejected"):
            raise InvalidArgumentError(f"decision must be confirmed or rejected, got {decision!r}")
    return [
        dataclasses.replace(o, verified=decisions.get(o.object_id, o.verified))
        for o in objects
    ]


def rescale_object(obj: GroundTruthObject, factor: int) -> GroundTruthObject:
    """Map an object's pixel set to a ``factor`` x coarser grid (deduplicated)."""
    if factor < 1:
        raise InvalidArgumentError("factor must be >= 1")
    if factor == 1:
        return obj
    scaled = obj.pixels // factor
    scaled = np.unique(scaled, axis=0)
    return dataclasses.replace(
        obj,
        pixels=scaled,
        centroid=(float(scaled[:, 0].mean()), float(scaled[:, 1].mean())),
    )


def export_ground_truth(objects: Iterable[GroundTruthObject], include_rejected: bool = False) -> list[dict]:
    """Training-set export: rejected objects are excluded unless asked for."""
    out = []
    for o in objects:
        if o.verified == "rejected" and not include_rejected:
            continue
        out.append(
            {
                "object_id": o.object_id,
                "image_id": o.image_id,
                "centroid": [o.centroid[0], o.centroid[1]],
                "area": o.area,
                "supporting_volunteers": o.supporting_volunteers,
                "verified": o.verified,
            }
        )
    return out


def parse_annotation_doc(doc: Mapping, width: int, height: int) -> tuple[list[VolunteerPolygon], int]:
    """Parse one per-image annotation document.

    Expected shape: ``{image_id, viewer_count, polygons: [{volunteer_id,
    vertices: [[x, y], ...]}]}``. Vertices are clamped to the image bounds.
    """
    image_id = doc["image_id"]
    viewer_count = int(doc["viewer_count"])
    polys = [
        clamp_polygon(
            VolunteerPolygon(image_id=image_id, volunteer_id=str(p["volunteer_id"]), vertices=p["vertices"]),
            width,
            height,
        )
        for p in doc.get("polygons", [])
    ]
    return polys, viewer_count


def load_annotation_file(path: str | Path, width: int, height: int) -> tuple[list[VolunteerPolygon], int]:
    with open(path) as f:
        return parse_annotation_doc(json.load(f), width, height)
