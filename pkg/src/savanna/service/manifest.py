"""Dataset layout on disk, ingestion, and derived-artifact bookkeeping.

A dataset root contains ``images/`` (PNG), optional ``annotations/``
(volunteer polygon documents and/or a generated ground-truth file),
optional ``metadata.json`` (per-image gsd and timestamp), and a
``derived/`` directory the pipeline stages write into.
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import InvalidArgumentError, NotFoundError
from ..fusion import GroundTruthObject
from ..raster import RasterImage, load_image

DEFAULT_GSD_CM = 4.0
GROUND_TRUTH_FILE = "ground_truth_full.json"


@dataclass
class DatasetManifest:
    dataset_id: str
    root: Path
    images: list[dict]  # {image_id, path, gsd_cm, acquired_at}
    annotations: list[str]
    derived: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "images": self.images,
            "annotations": self.annotations,
            "derived": self.derived,
        }

    @classmethod
    def from_json(cls, payload: dict, root: Path) -> "DatasetManifest":
        return cls(
            dataset_id=payload["dataset_id"],
            root=root,
            images=payload["images"],
            annotations=payload["annotations"],
            derived=dict(payload.get("derived", {})),
        )

    def save(self) -> None:
        with open(self.root / "manifest.json", "w") as f:
            json.dump(self.to_json(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, root: str | Path) -> "DatasetManifest":
        root = Path(root)
        path = root / "manifest.json"
        if not path.exists():
            raise NotFoundError(f"no manifest at {path}; run ingest first")
        with open(path) as f:
            manifest = cls.from_json(json.load(f), root)
        missing = [e["path"] for e in manifest.images if not (root / e["path"]).exists()]
        if missing:
            raise InvalidArgumentError(f"manifest references missing files: {missing[:5]}")
        return manifest

    @property
    def derived_dir(self) -> Path:
        d = self.root / "derived"
        d.mkdir(exist_ok=True)
        return d

    def load_images(self) -> list[RasterImage]:
        out = []
        for entry in self.images:
            acquired = entry.get("acquired_at")
            out.append(
                load_image(
                    self.root / entry["path"],
                    gsd_cm=float(entry["gsd_cm"]),
                    acquired_at=_dt.datetime.fromisoformat(acquired) if acquired else None,
                )
            )
        return out


@dataclass
class IngestReport:
    manifest: DatasetManifest
    invalid: list[tuple[str, str]]  # (filename, reason)


def ingest_dataset(root: str | Path, default_gsd_cm: float = DEFAULT_GSD_CM) -> IngestReport:
    """Build and persist a manifest for a dataset directory.

    Images must decode to 3-channel RGB; files that do not are listed in
    the report and skipped. The manifest content is deterministic (sorted,
    no timestamps), so re-ingesting an unchanged directory is byte-stable.
    """
    root = Path(root)
    images_dir = root / "images"
    if not images_dir.is_dir():
        raise InvalidArgumentError(f"{root} has no images/ directory")
    files = sorted(p for p in images_dir.iterdir() if p.is_file())
    if not files:
        raise InvalidArgumentError(f"{images_dir} is empty")

    metadata = {}
    meta_path = root / "metadata.json"
    if meta_path.exists():
        with open(meta_path) as f:
            metadata = json.load(f)

    entries = []
    invalid: list[tuple[str, str]] = []
    seen_ids: set[str] = set()
    for path in files:
        try:
            with Image.open(path) as im:
                im.convert("RGB").load()
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            invalid.append((path.name, str(exc) or exc.__class__.__name__))
            continue
        image_id = path.stem
        if image_id in seen_ids:
            invalid.append((path.name, f"duplicate image_id {image_id!r}"))
            continue
        seen_ids.add(image_id)
        meta = metadata.get(image_id, {})
        entries.append(
            {
                "image_id": image_id,
                "path": str(path.relative_to(root)),
                "gsd_cm": float(meta.get("gsd_cm", default_gsd_cm)),
                "acquired_at": meta.get("acquired_at"),
            }
        )
    if not entries:
        raise InvalidArgumentError(f"{images_dir} contains no decodable images")

    annotations = []
    ann_dir = root / "annotations"
    if ann_dir.is_dir():
        annotations = sorted(str(p.relative_to(root)) for p in ann_dir.iterdir() if p.suffix == ".json")

    manifest = DatasetManifest(
        dataset_id=root.name,
        root=root,
        images=entries,
        annotations=annotations,
        derived={},
    )
    manifest.save()
    return IngestReport(manifest=manifest, invalid=invalid)


def save_ground_truth(objects: list[GroundTruthObject], path: str | Path) -> None:
    """Full internal ground truth, pixel sets included."""
    payload = [
        {
            "object_id": o.object_id,
            "image_id": o.image_id,
            "pixels": o.pixels.tolist(),
            "centroid": [o.centroid[0], o.centroid[1]],
            "supporting_volunteers": o.supporting_volunteers,
            "verified": o.verified,
        }
        for o in objects
    ]
    with open(path, "w") as f:
        json.dump(payload, f)


def load_ground_truth(path: str | Path) -> list[GroundTruthObject]:
    with open(path) as f:
        payload = json.load(f)
    return [
        GroundTruthObject(
            object_id=o["object_id"],
            image_id=o["image_id"],
            pixels=np.asarray(o["pixels"], dtype=np.int64),
            centroid=(o["centroid"][0], o["centroid"][1]),
            supporting_volunteers=int(o["supporting_volunteers"]),
            verified=o.get("verified", "unverified"),
        )
        for o in payload
    ]


def write_synthetic_dataset(dataset, root: str | Path) -> DatasetManifest:
    """Materialize a generated dataset as an ingestible directory."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "annotations").mkdir(exist_ok=True)
    metadata = {}
    for img in dataset.images:
        Image.fromarray(img.pixels).save(root / "images" / f"{img.image_id}.png")
        metadata[img.image_id] = {
            "gsd_cm": img.gsd_cm,
            "acquired_at": img.acquired_at.isoformat() if img.acquired_at else None,
        }
    with open(root / "metadata.json", "w") as f:
        json.dump(metadata, f, indent=2, sort_keys=True)
    save_ground_truth(dataset.all_objects(), root / "annotations" / GROUND_TRUTH_FILE)
    report = ingest_dataset(root)
    return report.manifest
