"""JSON-over-HTTP service exposing pipeline runs and screening sessions.

The service adds no behavior of its own: every endpoint defers to the
library call it names, maps package exceptions onto the documented error
body ``{code, message, detail}``, serializes one writer per session, and
makes mutating endpoints idempotent under an ``idempotency_key``.
"""

from __future__ import annotations

import io
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from ..active_learning import Session, SessionConfig, Verdict, replay_log
from ..detector import EnsembleConfig, ExemplarEnsemble
from ..errors import ConflictError, InvalidArgumentError, NotFoundError, WorkbenchError
from ..evaluation.metrics import pr_curve, scored_from_arrays
from ..proposals import load_proposals_csv
from ..raster import RasterImage, downsample
from .manifest import DatasetManifest, load_ground_truth
from .sessions import SessionStore, restore_session
from .stages import STAGES, _proposal_cfg

_STATUS = {
    "invalid_argument": 400,
    "not_found": 404,
    "conflict": 409,
    "verdict_not_in_query": 409,
    "session_complete": 409,
    "training_failure": 409,
    "calibration_failure": 500,
    "internal": 500,
}


class VerdictIn(BaseModel):
    proposal_id: str
    decision: str
    promote_to_exemplar: bool = False


class FeedbackIn(BaseModel):
    verdicts: list[VerdictIn]
    idempotency_key: str | None = None


class SessionCreateIn(BaseModel):
    dataset_id: str
    query_size: int = 8
    exemplar_order: str = "confusion"
    idempotency_key: str | None = None


class PipelineIn(BaseModel):
    stage: str
    params: dict = Field(default_factory=dict)
    idempotency_key: str | None = None


class FinalizeIn(BaseModel):
    idempotency_key: str | None = None


class _SessionHandle:
    def __init__(self, session: Session, dataset_id: str, store: SessionStore):
        self.session = session
        self.dataset_id = dataset_id
        self.store = store
        self.status = "active"
        self.lock = threading.Lock()
        self.responses: dict[str, dict] = store.load_responses()
        self.metrics_cache: tuple[int, dict] | None = None

    def record(self) -> dict:
        return {
            "session_id": self.session.session_id,
            "dataset_id": self.dataset_id,
            "status": self.status,
            "counts": self.session.counts(),
        }


class WorkbenchService:
    """All mutable service state; the FastAPI app delegates here."""

    def __init__(self, data_root: str | Path):
        self.data_root = Path(data_root)
        self.data_root.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, _SessionHandle] = {}
        self.dataset_idempotency: dict[str, dict] = {}
        self._working_cache: dict[tuple[str, str], RasterImage] = {}
        self._chip_index: dict[str, tuple[str, str, tuple[float, float]]] = {}
        self._global_lock = threading.Lock()

    # -- datasets -------------------------------------------------------

    def list_datasets(self) -> list[dict]:
        out = []
        for path in sorted(self.data_root.iterdir() if self.data_root.is_dir() else []):
            if (path / "manifest.json").exists():
                m = DatasetManifest.load(path)
                out.append(
                    {
                        "dataset_id": m.dataset_id,
                        "images": len(m.images),
                        "stages": sorted(k for k in m.derived if not k.endswith("_config")),
                    }
                )
        return out

    def manifest(self, dataset_id: str) -> DatasetManifest:
        path = self.data_root / dataset_id
        if not (path / "manifest.json").exists():
            raise NotFoundError(f"unknown dataset {dataset_id!r}")
        return DatasetManifest.load(path)

    def run_stage(self, dataset_id: str, body: PipelineIn) -> dict:
        if body.stage not in STAGES:
            raise InvalidArgumentError(f"unknown stage {body.stage!r}; choose from {sorted(STAGES)}")
        scope = self.dataset_idempotency.setdefault(dataset_id, {})
        if body.idempotency_key and body.idempotency_key in scope:
            return scope[body.idempotency_key]
        manifest = self.manifest(dataset_id)
        result = STAGES[body.stage](manifest, **body.params)
        if body.idempotency_key:
            scope[body.idempotency_key] = result
        self._chip_index = {k: v for k, v in self._chip_index.items() if v[0] != dataset_id}
        return result

    # -- chips ------------------------------------------------------------

    def _index_chips(self, dataset_id: str) -> None:
        manifest = self.manifest(dataset_id)
        rel = manifest.derived.get("proposals")
        if rel is None:
            return
        for p in load_proposals_csv(manifest.root / rel):
            self._chip_index[p.proposal_id] = (dataset_id, p.image_id, p.centroid)

    def _working_image(self, dataset_id: str, image_id: str) -> RasterImage:
        key = (dataset_id, image_id)
        if key not in self._working_cache:
            manifest = self.manifest(dataset_id)
            cfg = _proposal_cfg(manifest)
            entry = next((e for e in manifest.images if e["image_id"] == image_id), None)
            if entry is None:
                raise NotFoundError(f"unknown image {image_id!r}")
            img = [i for i in manifest.load_images() if i.image_id == image_id][0]
            factor = int(round(cfg.working_gsd_cm / img.gsd_cm))
            self._working_cache[key] = downsample(img, max(1, factor))
        return self._working_cache[key]

    def chip_png(self, proposal_id: str, size: int = 100) -> bytes:
        if proposal_id not in self._chip_index:
            for path in self.data_root.iterdir():
                if (path / "manifest.json").exists():
                    self._index_chips(path.name)
        if proposal_id not in self._chip_index:
            raise NotFoundError(f"unknown proposal {proposal_id!r}")
        dataset_id, image_id, centroid = self._chip_index[proposal_id]
        img = self._working_image(dataset_id, image_id)
        half = size // 2
        cx = int(np.floor(centroid[0] + 0.5))
        cy = int(np.floor(centroid[1] + 0.5))
        xs = np.clip(np.arange(cx - half, cx + half), 0, img.width - 1)
        ys = np.clip(np.arange(cy - half, cy + half), 0, img.height - 1)
        crop = img.pixels[np.ix_(ys, xs)]
        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray(crop).save(buf, format="PNG")
        return buf.getvalue()

    # -- sessions ---------------------------------------------------------

    def _load_pools(self, manifest: DatasetManifest):
        rel = manifest.derived.get("pools")
        if rel is None:
            raise InvalidArgumentError("dataset has no trained pools; run the train stage first")
        data = np.load(manifest.root / rel, allow_pickle=False)
        return data

    def create_session(self, body: SessionCreateIn) -> dict:
        scope = self.dataset_idempotency.setdefault(f"sessions:{body.dataset_id}", {})
        if body.idempotency_key and body.idempotency_key in scope:
            return scope[body.idempotency_key]
        manifest = self.manifest(body.dataset_id)
        pools = self._load_pools(manifest)
        ens_rel = manifest.derived.get("ensemble")
        base = ExemplarEnsemble.load(manifest.root / ens_rel) if ens_rel else None
        session_id = f"s{uuid.uuid4().hex[:10]}"
        session = Session(
            session_id=session_id,
            positive_ids=[str(s) for s in pools["positive_ids"]],
            positives=pools["positives"],
            negative_ids=[str(s) for s in pools["negative_ids"]],
            negatives=pools["negatives"],
            config=SessionConfig(
                query_size=body.query_size,
                exemplar_order=body.exemplar_order,
                ensemble=EnsembleConfig(kkt_tol=1e-3),
            ),
            base_ensemble=base,
        )
        store = SessionStore(manifest.derived_dir / "sessions" / session_id)
        handle = _SessionHandle(session, body.dataset_id, store)
        store.write_snapshot(session, body.dataset_id, handle.status)
        self.sessions[session_id] = handle
        record = handle.record()
        if body.idempotency_key:
            scope[body.idempotency_key] = record
        return record

    def _handle(self, session_id: str) -> _SessionHandle:
        if session_id in self.sessions:
            return self.sessions[session_id]
        with self._global_lock:
            if session_id in self.sessions:
                return self.sessions[session_id]
            for path in self.data_root.iterdir():
                sdir = path / "derived" / "sessions" / session_id
                if sdir.is_dir():
                    manifest = DatasetManifest.load(path)
                    pools = self._load_pools(manifest)
                    feats = {str(p): row for p, row in zip(pools["positive_ids"], pools["positives"])}
                    feats.update({str(p): row for p, row in zip(pools["negative_ids"], pools["negatives"])})
                    store = SessionStore(sdir)
                    ens_rel = manifest.derived.get("ensemble")
                    base = ExemplarEnsemble.load(manifest.root / ens_rel) if ens_rel else None
                    session, snap = restore_session(store, feats, EnsembleConfig(kkt_tol=1e-3), base)
                    handle = _SessionHandle(session, snap["dataset_id"], store)
                    handle.status = snap.get("status", "active")
                    self.sessions[session_id] = handle
                    return handle
        raise NotFoundError(f"unknown session {session_id!r}")

    def session_record(self, session_id: str) -> dict:
        return self._handle(session_id).record()

    def query(self, session_id: str) -> dict:
        handle = self._handle(session_id)
        with handle.lock:
            session = handle.session
            if session.pending_query is None:
                session.next_query()
            q = session.pending_query
            return {
                "query_id": q.query_id,
                "exemplar_id": q.exemplar_id,
                "exemplar_chip": f"chips/{q.exemplar_id}",
                "items": [
                    {"proposal_id": it.proposal_id, "score": it.score, "chip": it.chip_ref}
                    for it in q.items
                ],
            }

    def feedback(self, session_id: str, body: FeedbackIn) -> dict:
        handle = self._handle(session_id)
        with handle.lock:
            if body.idempotency_key and body.idempotency_key in handle.responses:
                return handle.responses[body.idempotency_key]
            if not body.verdicts:
                raise InvalidArgumentError("verdicts must be non-empty")
            session = handle.session
            before = len(session.feedback_log)
            report = session.apply_feedback(
                [
                    Verdict(v.proposal_id, v.decision, promote_to_exemplar=v.promote_to_exemplar)
                    for v in body.verdicts
                ]
            )
            handle.store.append_batch(session.feedback_log[before:])
            if session.queries_answered % 10 == 0:
                handle.store.write_snapshot(session, handle.dataset_id, handle.status)
            response = {"report": report, "record": handle.record()}
            if body.idempotency_key:
                handle.responses[body.idempotency_key] = response
                handle.store.save_responses(handle.responses)
            return response

    def finalize(self, session_id: str, body: FinalizeIn) -> dict:
        handle = self._handle(session_id)
        with handle.lock:
            if body.idempotency_key and body.idempotency_key in handle.responses:
                return handle.responses[body.idempotency_key]
            ensemble, report = handle.session.finalize()
            manifest = self.manifest(handle.dataset_id)
            out = manifest.derived_dir / f"ensemble_session_{session_id}.bin"
            ensemble.save(out)
            handle.status = "finalized"
            handle.store.write_snapshot(handle.session, handle.dataset_id, handle.status)
            response = {"report": report, "ensemble_path": str(out), "record": handle.record()}
            if body.idempotency_key:
                handle.responses[body.idempotency_key] = response
                handle.store.save_responses(handle.responses)
            return response

    def metrics(self, session_id: str) -> dict:
        handle = self._handle(session_id)
        with handle.lock:
            version = len(handle.session.feedback_log)
            if handle.metrics_cache and handle.metrics_cache[0] == version:
                return handle.metrics_cache[1]
            manifest = self.manifest(handle.dataset_id)
            pools = self._load_pools(manifest)
            eval_ids = [str(s) for s in pools["eval_ids"]]
            labels = [str(s) for s in pools["eval_labels"]]
            if not eval_ids or len(set(labels)) < 2:
                raise ConflictError("no two-class eval pool; metrics unavailable")
            ensemble, _ = handle.session.finalize()
            scores = ensemble.decision_function(pools["eval_X"])
            curve = pr_curve(scored_from_arrays(eval_ids, scores, labels))
            payload = {
                "kind": "pr",
                "auc": curve.auc,
                "points": [{"threshold": t, "x": x, "y": y} for t, x, y in curve.points if np.isfinite(t)],
                "counts": handle.session.counts(),
            }
            handle.metrics_cache = (version, payload)
            return payload

    def audit(self, session_id: str) -> dict:
        handle = self._handle(session_id)
        session = handle.session
        replayed = replay_log(
            session.initial_positive_ids, session.initial_negative_ids, handle.store.read_log()
        )
        live = session.counts()
        consistent = (
            replayed["positive_ids"] == session.positive_ids
            and replayed["negative_ids"] == session.negative_ids
            and replayed["removed"] == session.removed
            and replayed["queries_answered"] == live["queries_answered"]
        )
        return {
            "consistent": bool(consistent),
            "live_counts": live,
            "replayed_counts": {
                "positives": len(replayed["positive_ids"]),
                "negatives": len(replayed["negative_ids"]),
                "removed_unclear": sum(1 for r in replayed["removed"].values() if r == "unclear"),
                "queries_answered": replayed["queries_answered"],
            },
            "log_events": len(handle.store.read_log()),
        }

    def export_ground_truth(self, dataset_id: str) -> list[dict]:
        """Fusion objects plus session promotions, minus rejected/unclear.

        A ``derived/verification.json`` file ({object_id: confirmed|rejected})
        is applied across both sources, so a promoted proposal rejected in a
        later verification pass nets out of the export.
        """
        manifest = self.manifest(dataset_id)
        decisions: dict[str, str] = {}
        verification = manifest.derived_dir / "verification.json"
        if verification.exists():
            with open(verification) as f:
                import json as _json

                decisions = _json.load(f)
        rel = manifest.derived.get("ground_truth")
        entries: list[dict] = []
        if rel is not None:
            for o in load_ground_truth(manifest.root / rel):
                if o.verified == "rejected" or decisions.get(o.object_id) == "rejected":
                    continue
                entries.append(
                    {
                        "object_id": o.object_id,
                        "image_id": o.image_id,
                        "centroid": [o.centroid[0], o.centroid[1]],
                        "area": o.area,
                        "supporting_volunteers": o.supporting_volunteers,
                        "verified": o.verified,
                        "source": "fusion",
                    }
                )
        self._index_chips(dataset_id)
        sessions_dir = manifest.derived_dir / "sessions"
        promoted: dict[str, dict] = {}
        if sessions_dir.is_dir():
            for sdir in sorted(sessions_dir.iterdir()):
                store = SessionStore(sdir)
                for entry in store.read_log():
                    if entry.decision == "animal" and entry.promote:
                        if decisions.get(entry.proposal_id) == "rejected":
                            continue
                        loc = self._chip_index.get(entry.proposal_id)
                        promoted[entry.proposal_id] = {
                            "object_id": entry.proposal_id,
                            "image_id": loc[1] if loc else "",
                            "centroid": list(loc[2]) if loc else None,
                            "area": None,
                            "supporting_volunteers": None,
                            "verified": "confirmed",
                            "source": "active_learning",
                        }
        entries.extend(promoted[k] for k in sorted(promoted))
        if not entries:
            raise InvalidArgumentError("nothing to export: no ground truth and no promotions")
        return entries


def create_app(data_root: str | Path) -> FastAPI:
    service = WorkbenchService(data_root)
    app = FastAPI(title="savanna workbench", version="0.1.0")
    app.state.service = service

    @app.exception_handler(WorkbenchError)
    async def _workbench_error(_request: Request, exc: WorkbenchError):
        return JSONResponse(
            status_code=_STATUS.get(exc.code, 500),
            content={"code": exc.code, "message": str(exc), "detail": None},
        )

    @app.get("/datasets")
    def datasets():
        return service.list_datasets()

    @app.post("/datasets/{dataset_id}/pipeline")
    def pipeline(dataset_id: str, body: PipelineIn):
        return service.run_stage(dataset_id, body)

    @app.get("/datasets/{dataset_id}/ground_truth")
    def ground_truth(dataset_id: str):
        return service.export_ground_truth(dataset_id)

    @app.post("/sessions")
    def create_session(body: SessionCreateIn):
        return service.create_session(body)

    @app.get("/sessions/{session_id}")
    def session_record(session_id: str):
        return service.session_record(session_id)

    @app.get("/sessions/{session_id}/query")
    def query(session_id: str):
        return service.query(session_id)

    @app.post("/sessions/{session_id}/feedback")
    def feedback(session_id: str, body: FeedbackIn):
        return service.feedback(session_id, body)

    @app.post("/sessions/{session_id}/finalize")
    def finalize(session_id: str, body: FinalizeIn | None = None):
        return service.finalize(session_id, body or FinalizeIn())

    @app.get("/sessions/{session_id}/metrics")
    def metrics(session_id: str):
        return service.metrics(session_id)

    @app.get("/sessions/{session_id}/audit")
    def audit(session_id: str):
        return service.audit(session_id)

    @app.get("/chips/{proposal_id}")
    def chip(proposal_id: str):
        return Response(content=service.chip_png(proposal_id), media_type="image/png")

    return app


def serve(data_root: str | Path, host: str = "127.0.0.1", port: int = 8008) -> None:
    import uvicorn

    uvicorn.run(create_app(data_root), host=host, port=port, log_level="warning")
