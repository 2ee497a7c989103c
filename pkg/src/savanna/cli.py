"""Command-line interface over the pipeline stages, experiments and service."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import click

from .errors import WorkbenchError
from .evaluation import (
    ExperimentConfig,
    SynthParams,
    UnbalancedConfig,
    curve_to_csv,
    run_balanced_ablation,
    run_unbalanced_eval,
    split_dataset,
    synth_generate,
)
from .proposals import ProposalConfig
from .service import ingest_dataset, write_synthetic_dataset
from .service.manifest import DatasetManifest
from .service.stages import run_codebook, run_features, run_fuse, run_proposals, run_train


@click.group()
def cli():
    """Wildlife-detection workbench: synthetic data, pipeline stages, service."""


def _echo(payload: dict) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True, default=str))


def _wrap(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except WorkbenchError as exc:
        raise click.ClickException(f"[{exc.code}] {exc}") from exc


@cli.command()
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--images", default=60, show_default=True)
@click.option("--size", default=512, show_default=True, help="Image width and height in px.")
@click.option("--gsd", default=4.0, show_default=True, help="Ground sampling distance, cm/px.")
@click.option("--animals", default=3, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--bushes", default=None, type=int)
@click.option("--holes", default=None, type=int)
@click.option("--stones", default=None, type=int)
def synth(out_dir, images, size, gsd, animals, seed, bushes, holes, stones):
    """Generate a seeded synthetic savanna dataset and ingest it."""
    params = SynthParams(
        image_count=images,
        width=size,
        height=size,
        gsd_cm=gsd,
        animals_per_image=animals,
        seed=seed,
    )
    overrides = {}
    if bushes is not None:
        overrides["bushes_per_image"] = bushes
    if holes is not None:
        overrides["holes_per_image"] = holes
    if stones is not None:
        overrides["stones_per_image"] = stones
    if overrides:
        params = dataclasses.replace(params, **overrides)
    dataset = _wrap(synth_generate, params)
    manifest = _wrap(write_synthetic_dataset, dataset, out_dir)
    _echo({"dataset_id": manifest.dataset_id, "images": len(manifest.images), "root": str(out_dir)})


@cli.command()
@click.argument("directory", type=click.Path(exists=True, path_type=Path))
@click.option("--gsd", default=4.0, show_default=True, help="Default gsd for images without metadata.")
def ingest(directory, gsd):
    """Build the dataset manifest from a directory of PNG images."""
    report = _wrap(ingest_dataset, directory, gsd)
    _echo(
        {
            "dataset_id": report.manifest.dataset_id,
            "images": len(report.manifest.images),
            "invalid": report.invalid,
        }
    )


@cli.command()
@click.argument("dataset", type=click.Path(exists=True, path_type=Path))
def fuse(dataset):
    """Fuse volunteer annotations (or install generated truth) into ground truth."""
    _echo(_wrap(run_fuse, DatasetManifest.load(dataset)))


@cli.command()
@click.argument("dataset", type=click.Path(exists=True, path_type=Path))
@click.option("--value-threshold", default=60.0, show_default=True)
@click.option("--sobel-threshold", default=120.0, show_default=True)
@click.option("--min-area", default=3, show_default=True)
@click.option("--merge-radius", default=60.0, show_default=True, help="cm")
@click.option("--working-gsd", default=8.0, show_default=True, help="cm/px")
def proposals(dataset, value_threshold, sobel_threshold, min_area, merge_radius, working_gsd):
    """Generate labeled object proposals at the working resolution."""
    cfg = ProposalConfig(
        value_threshold=value_threshold,
        sobel_threshold=sobel_threshold,
        min_area_px=min_area,
        merge_radius_cm=merge_radius,
        working_gsd_cm=working_gsd,
    )
    _echo(_wrap(run_proposals, DatasetManifest.load(dataset), cfg))


@cli.command()
@click.argument("dataset", type=click.Path(exists=True, path_type=Path))
@click.option("--k", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--patches", default=20000, show_default=True)
@click.option("--positive-patches", default=5000, show_default=True)
def codebook(dataset, k, seed, patches, positive_patches):
    """Train the k-means visual vocabulary."""
    _echo(
        _wrap(
            run_codebook,
            DatasetManifest.load(dataset),
            k=k,
            seed=seed,
            n_patches=patches,
            n_positive=positive_patches,
        )
    )


@cli.command()
@click.argument("dataset", type=click.Path(exists=True, path_type=Path))
@click.option("--k", default=100, show_default=True)
def features(dataset, k):
    """Extract raw HOC and BoVW descriptors for every proposal."""
    _echo(_wrap(run_features, DatasetManifest.load(dataset), k=k))


@cli.command()
@click.argument("dataset", type=click.Path(exists=True, path_type=Path))
@click.option("--k", default=100, show_default=True)
@click.option("--kind", default="combined", show_default=True, type=click.Choice(["hoc", "bovw", "combined"]))
@click.option("--eval-fraction", default=0.5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--max-positives", default=None, type=int)
def train(dataset, k, kind, eval_fraction, seed, max_positives):
    """Train the exemplar ensemble on the training half of the dataset."""
    _echo(
        _wrap(
            run_train,
            DatasetManifest.load(dataset),
            k=k,
            feature_kind=kind,
            eval_fraction=eval_fraction,
            seed=seed,
            max_positives=max_positives,
        )
    )


@cli.command()
@click.argument("dataset", type=click.Path(exists=True, path_type=Path))
@click.option(
    "--grid",
    default="features",
    show_default=True,
    type=click.Choice(["features", "words", "resolution", "unbalanced"]),
)
@click.option("--repeats", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--patches", default=20000, show_default=True)
@click.option("--positive-patches", default=5000, show_default=True)
@click.option("--out", "out_dir", default=None, type=click.Path(path_type=Path))
def evaluate(dataset, grid, repeats, seed, patches, positive_patches, out_dir):
    """Run an evaluation protocol on a generated dataset directory."""
    from .service.manifest import load_ground_truth
    from .evaluation.synth import SyntheticDataset, SynthParams as _SP

    manifest = DatasetManifest.load(dataset)
    images = manifest.load_images()
    gt_rel = manifest.derived.get("ground_truth")
    if gt_rel is None:
        raise click.ClickException("run fuse first: evaluation needs ground truth")
    objects = load_ground_truth(manifest.root / gt_rel)
    gt_map: dict[str, tuple] = {}
    for o in objects:
        gt_map.setdefault(o.image_id, ())
    for o in objects:
        gt_map[o.image_id] = gt_map[o.image_id] + (o,)
    ds = SyntheticDataset(images=tuple(images), ground_truth=gt_map, params=_SP(image_count=len(images)))

    out_dir = out_dir or (manifest.derived_dir / "curves")
    out_dir.mkdir(parents=True, exist_ok=True)
    summary: dict = {"grid": grid, "seed": seed}

    if grid == "unbalanced":
        train_split, test_split = split_dataset(ds, 0.5, seed)
        cfg = UnbalancedConfig(seed=seed, n_patches=patches, n_positive_patches=positive_patches)
        result = _wrap(run_unbalanced_eval, train_split, test_split, cfg)
        curve_to_csv(result.curve, out_dir / "unbalanced_pr.csv")
        summary["report"] = result.report
    else:
        common = dict(repeats=repeats, seed=seed, n_patches=patches, n_positive_patches=positive_patches)
        cfg = {
            "features": ExperimentConfig(feature_kinds=("hoc", "bovw", "combined"), **common),
            "words": ExperimentConfig(feature_kinds=("combined",), k_values=(100, 300), **common),
            "resolution": ExperimentConfig(feature_kinds=("combined",), gsd_values=(8.0, 12.0, 16.0), **common),
        }[grid]
        results = _wrap(run_balanced_ablation, ds, cfg)
        cells = {}
        for (kind, k, gsd), cell in results.items():
            name = f"roc_{kind}_k{k}_gsd{gsd:g}.csv"
            curve_to_csv(cell.curve, out_dir / name)
            cells[f"{kind},k={k},gsd={gsd:g}"] = {"mean_auc": cell.mean_auc, "aucs": cell.aucs, "csv": name}
        summary["cells"] = cells
    with open(out_dir / f"summary_{grid}.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    _echo(summary)


@cli.command()
@click.option("--port", default=8008, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-root", required=True, type=click.Path(path_type=Path))
def serve(port, host, data_root):
    """Serve the JSON API (and the screening UI's backend)."""
    from .service import serve as _serve

    click.echo(f"serving datasets under {data_root} on http://{host}:{port}")
    _serve(data_root, host=host, port=port)


def main():
    cli()


if __name__ == "__main__":
    main()
