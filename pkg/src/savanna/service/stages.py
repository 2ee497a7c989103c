"""Pipeline stage runners over a dataset directory.

Each stage reads the manifest plus earlier artifacts and writes its outputs
under ``derived/``, keyed by a config fingerprint where it matters so
re-runs with the same parameters reuse what exists.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from ..detector import EnsembleConfig, build_ensemble
from ..errors import InvalidArgumentError
from ..evaluation.metrics import pr_curve, recall_at_precision, scored_from_arrays
from ..features import Codebook, combine_matrices, normalize_features
from ..fusion import build_consensus, extract_objects, load_annotation_file
from ..pipeline import (
    build_feature_bank,
    feature_fingerprint,
    proposals_for_dataset,
    to_working_resolution,
)
from ..proposals import ProposalConfig, load_proposals_csv, save_proposals_csv
from .manifest import (
    GROUND_TRUTH_FILE,
    DatasetManifest,
    load_ground_truth,
    save_ground_truth,
)


def _image_dims(manifest: DatasetManifest) -> dict[str, tuple[int, int]]:
    from PIL import Image

    dims = {}
    for entry in manifest.images:
        with Image.open(manifest.root / entry["path"]) as im:
            dims[entry["image_id"]] = im.size  # (width, height)
    return dims


def run_fuse(manifest: DatasetManifest) -> dict:
    """Fuse volunteer polygon annotations into ground truth.

    Datasets generated synthetically already carry exact ground truth; in
    that case fusion just installs it.
    """
    synth_path = manifest.root / "annotations" / GROUND_TRUTH_FILE
    out_path = manifest.derived_dir / "ground_truth_full.json"
    if synth_path.exists():
        objects = load_ground_truth(synth_path)
        save_ground_truth(objects, out_path)
        manifest.derived["ground_truth"] = str(out_path.relative_to(manifest.root))
        manifest.save()
        return {"stage": "fuse", "objects": len(objects), "source": "generated"}

    ann_files = [p for p in manifest.annotations if not p.endswith(GROUND_TRUTH_FILE)]
    if not ann_files:
        raise InvalidArgumentError("dataset has no annotations to fuse")
    dims = _image_dims(manifest)
    objects = []
    for rel in ann_files:
        path = manifest.root / rel
        with open(path) as f:
            image_id = json.load(f)["image_id"]
        if image_id not in dims:
            raise InvalidArgumentError(f"annotations for unknown image {image_id!r}")
        width, height = dims[image_id]
        polys, viewer_count = load_annotation_file(path, width, height)
        cmap = build_consensus(image_id, polys, viewer_count, width, height)
        objects.extend(extract_objects(cmap))
    save_ground_truth(objects, out_path)
    manifest.derived["ground_truth"] = str(out_path.relative_to(manifest.root))
    manifest.save()
    return {"stage": "fuse", "objects": len(objects), "source": "volunteers"}


def _load_gt(manifest: DatasetManifest):
    rel = manifest.derived.get("ground_truth")
    if rel is None:
        return None
    return load_ground_truth(manifest.root / rel)


def run_proposals(manifest: DatasetManifest, cfg: ProposalConfig | None = None) -> dict:
    cfg = cfg or ProposalConfig()
    images = manifest.load_images()
    gt = _load_gt(manifest)
    working, gt_w = to_working_resolution(images, gt or [], cfg.working_gsd_cm)
    props = proposals_for_dataset(working, cfg, gt_w if gt else None)
    out = manifest.derived_dir / "proposals.csv"
    save_proposals_csv(props, out)
    manifest.derived["proposals"] = str(out.relative_to(manifest.root))
    manifest.derived["proposal_config"] = json.dumps(dataclasses.asdict(cfg), sort_keys=True)
    manifest.save()
    labeled = sum(1 for p in props if p.label == "animal")
    return {"stage": "proposals", "proposals": len(props), "animal_labeled": labeled}


def _proposal_cfg(manifest: DatasetManifest) -> ProposalConfig:
    raw = manifest.derived.get("proposal_config")
    return ProposalConfig(**json.loads(raw)) if raw else ProposalConfig()


def run_codebook(
    manifest: DatasetManifest,
    k: int = 100,
    seed: int = 0,
    n_patches: int = 20000,
    n_positive: int = 5000,
    window: int = 25,
) -> dict:
    gt = _load_gt(manifest)
    if gt is None:
        raise InvalidArgumentError("run fuse before codebook: patch sampling needs ground truth")
    cfg = _proposal_cfg(manifest)
    images = manifest.load_images()
    working, gt_w = to_working_resolution(images, gt, cfg.working_gsd_cm)
    from ..pipeline import train_dataset_codebook

    codebook = train_dataset_codebook(
        working, gt_w, k=k, seed=seed, n_patches=n_patches, n_positive=n_positive, window=window
    )
    out = manifest.derived_dir / f"codebook_k{k}.bin"
    codebook.save(out)
    manifest.derived[f"codebook_k{k}"] = str(out.relative_to(manifest.root))
    manifest.save()
    return {
        "stage": "codebook",
        "k": k,
        "iterations": codebook.iterations_run_,
        "distortion": codebook.distortion_,
    }


def run_features(manifest: DatasetManifest, k: int = 100, window: int = 25, bins: int = 10) -> dict:
    cfg = _proposal_cfg(manifest)
    if "proposals" not in manifest.derived:
        raise InvalidArgumentError("run proposals before features")
    cb_key = f"codebook_k{k}"
    if cb_key not in manifest.derived:
        raise InvalidArgumentError(f"run codebook --k {k} before features")
    props = load_proposals_csv(manifest.root / manifest.derived["proposals"])
    codebook = Codebook.load(manifest.root / manifest.derived[cb_key])
    images = manifest.load_images()
    working, _ = to_working_resolution(images, [], cfg.working_gsd_cm)
    bank = build_feature_bank(working, props, kind="combined", codebook=codebook, window=window, bins=bins)

    for kind, matrix in (("hoc", bank.hoc), (f"bovw_k{k}", bank.bovw)):
        csv_path = manifest.derived_dir / f"features_{kind}.csv"
        with open(csv_path, "w") as f:
            f.write("proposal_id," + ",".join(f"v{i}" for i in range(matrix.shape[1])) + "\n")
            for pid, row in zip(bank.ids, matrix):
                f.write(pid + "," + ",".join(f"{v:g}" for v in row) + "\n")
        manifest.derived[f"features_{kind}"] = str(csv_path.relative_to(manifest.root))
    npz_path = manifest.derived_dir / f"features_k{k}.npz"
    np.savez_compressed(
        npz_path,
        ids=np.array(bank.ids),
        hoc=bank.hoc,
        bovw=bank.bovw,
    )
    manifest.derived[f"features_npz_k{k}"] = str(npz_path.relative_to(manifest.root))
    manifest.save()
    return {"stage": "features", "proposals": len(bank.ids), "hoc_dim": bank.hoc.shape[1], "bovw_dim": bank.bovw.shape[1]}


def run_train(
    manifest: DatasetManifest,
    k: int = 100,
    feature_kind: str = "combined",
    eval_fraction: float = 0.5,
    seed: int = 0,
    max_positives: int | None = None,
    ensemble_cfg: EnsembleConfig | None = None,
) -> dict:
    """Split images, build pools, normalize, train the ensemble, score eval."""
    npz_key = f"features_npz_k{k}"
    if npz_key not in manifest.derived:
        raise InvalidArgumentError("run features before train")
    data = np.load(manifest.root / manifest.derived[npz_key], allow_pickle=False)
    ids = [str(s) for s in data["ids"]]
    props = load_proposals_csv(manifest.root / manifest.derived["proposals"])
    label_by_id = {p.proposal_id: p.label for p in props}
    image_by_id = {p.proposal_id: p.image_id for p in props}

    image_ids = sorted({e["image_id"] for e in manifest.images})
    rng = np.random.default_rng(seed)
    rng.shuffle(image_ids)
    n_eval = max(1, int(round(len(image_ids) * eval_fraction))) if len(image_ids) > 1 else 0
    eval_images = set(image_ids[:n_eval])

    index = {pid: i for i, pid in enumerate(ids)}

    def matrix_for(pids: list[str]) -> np.ndarray:
        sel = np.array([index[p] for p in pids], dtype=np.int64)
        if feature_kind == "hoc":
            return data["hoc"][sel]
        if feature_kind == "bovw":
            return data["bovw"][sel]
        return np.concatenate([data["hoc"][sel], data["bovw"][sel]], axis=1)

    train_ids = [p for p in ids if image_by_id[p] not in eval_images and label_by_id[p] != "unknown"]
    eval_ids = [p for p in ids if image_by_id[p] in eval_images and label_by_id[p] != "unknown"]
    pos_ids = [p for p in train_ids if label_by_id[p] == "animal"]
    neg_ids = [p for p in train_ids if label_by_id[p] == "background"]
    if max_positives is not None and len(pos_ids) > max_positives:
        keep = sorted(rng.choice(len(pos_ids), size=max_positives, replace=False).tolist())
        pos_ids = [pos_ids[i] for i in keep]
    if not pos_ids:
        raise InvalidArgumentError("no positive proposals available for training")

    # Normalize per feature type with train-pool statistics, then combine.
    def normalized(pids_train, pids_other):
        def split_norm(key):
            sel_t = np.array([index[p] for p in pids_train], dtype=np.int64)
            sel_o = np.array([index[p] for p in pids_other], dtype=np.int64) if pids_other else np.empty(0, np.int64)
            tr, ot, _ = normalize_features(data[key][sel_t], data[key][sel_o])
            return tr, ot

        if feature_kind == "hoc":
            return split_norm("hoc")
        if feature_kind == "bovw":
            return split_norm("bovw")
        tr_h, ot_h = split_norm("hoc")
        tr_b, ot_b = split_norm("bovw")
        return combine_matrices(tr_h, tr_b), combine_matrices(ot_h, ot_b)

    pool_ids = pos_ids + neg_ids
    X_pool, X_eval = normalized(pool_ids, eval_ids)
    n_pos = len(pos_ids)

    fingerprint = feature_fingerprint(feature_kind, k, _proposal_cfg(manifest).working_gsd_cm, seed=seed)
    cfg = ensemble_cfg or EnsembleConfig(kkt_tol=1e-3)
    cfg = dataclasses.replace(cfg, fingerprint=fingerprint)
    ens = build_ensemble(X_pool[:n_pos], X_pool[n_pos:], cfg, positive_ids=pos_ids)

    report: dict = {
        "stage": "train",
        "fingerprint": fingerprint,
        "members": len(ens.members_),
        "train_positives": n_pos,
        "train_negatives": len(neg_ids),
        "eval_pool": len(eval_ids),
    }
    if eval_ids:
        scores = ens.decision_function(X_eval)
        labels = [label_by_id[p] for p in eval_ids]
        if "animal" in labels and "background" in labels:
            curve = pr_curve(scored_from_arrays(eval_ids, scores, labels))
            report["eval_average_precision"] = curve.auc
            report["eval_recall_at_precision_0.10"] = recall_at_precision(curve, 0.10)

    ens_path = manifest.derived_dir / f"ensemble_{fingerprint}.bin"
    ens.save(ens_path)
    pools_path = manifest.derived_dir / f"pools_{fingerprint}.npz"
    np.savez_compressed(
        pools_path,
        positive_ids=np.array(pos_ids),
        negative_ids=np.array(neg_ids),
        positives=X_pool[:n_pos],
        negatives=X_pool[n_pos:],
        eval_ids=np.array(eval_ids),
        eval_X=X_eval if eval_ids else np.empty((0, X_pool.shape[1])),
        eval_labels=np.array([label_by_id[p] for p in eval_ids]),
    )
    manifest.derived["ensemble"] = str(ens_path.relative_to(manifest.root))
    manifest.derived["pools"] = str(pools_path.relative_to(manifest.root))
    manifest.derived["train_report"] = json.dumps(report, sort_keys=True)
    manifest.save()
    return report


STAGES = {
    "fuse": run_fuse,
    "proposals": run_proposals,
    "codebook": run_codebook,
    "features": run_features,
    "train": run_train,
}
