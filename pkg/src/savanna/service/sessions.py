"""Active-learning session persistence: append-only log plus snapshots.

Every feedback batch appends one JSON line per verdict; a snapshot is
rewritten periodically. Crash recovery loads the snapshot's initial pools
and replays the full log, which reproduces pool membership exactly (the
session protocol is deterministic given pools).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..active_learning import (
    Session,
    SessionConfig,
    log_entry_from_dict,
    log_entry_to_dict,
    replay_log,
)
from ..detector import EnsembleConfig, ExemplarEnsemble
from ..errors import NotFoundError

SNAPSHOT_EVERY = 10


class SessionStore:
    """Disk layout: ``<dir>/snapshot.json``, ``<dir>/log.jsonl``,
    ``<dir>/responses.json`` (idempotency replies)."""

    def __init__(self, directory: str | Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    @property
    def log_path(self) -> Path:
        return self.dir / "log.jsonl"

    def write_snapshot(self, session: Session, dataset_id: str, status: str) -> None:
        payload = {
            "session_id": session.session_id,
            "dataset_id": dataset_id,
            "status": status,
            "initial_positive_ids": list(session.initial_positive_ids),
            "initial_negative_ids": list(session.initial_negative_ids),
            "query_size": session.config.query_size,
            "exemplar_order": session.config.exemplar_order,
            "counts": session.counts(),
        }
        with open(self.dir / "snapshot.json", "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)

    def read_snapshot(self) -> dict:
        path = self.dir / "snapshot.json"
        if not path.exists():
            raise NotFoundError(f"no session snapshot under {self.dir}")
        with open(path) as f:
            return json.load(f)

    def append_batch(self, entries) -> None:
        with open(self.log_path, "a") as f:
            for e in entries:
                f.write(json.dumps(log_entry_to_dict(e), sort_keys=True) + "\n")

    def read_log(self):
        if not self.log_path.exists():
            return []
        with open(self.log_path) as f:
            return [log_entry_from_dict(json.loads(line)) for line in f if line.strip()]

    def save_responses(self, responses: dict) -> None:
        with open(self.dir / "responses.json", "w") as f:
            json.dump(responses, f, sort_keys=True)

    def load_responses(self) -> dict:
        path = self.dir / "responses.json"
        if not path.exists():
            return {}
        with open(path) as f:
            return json.load(f)


def restore_session(
    store: SessionStore,
    features_by_id: dict[str, np.ndarray],
    ensemble_cfg: EnsembleConfig,
    base_ensemble: ExemplarEnsemble | None = None,
) -> tuple[Session, dict]:
    """Snapshot + full log replay -> a live session in the recovered state."""
    snap = store.read_snapshot()
    config = SessionConfig(
        query_size=int(snap["query_size"]),
        exemplar_order=snap["exemplar_order"],
        ensemble=ensemble_cfg,
    )
    pos_ids = snap["initial_positive_ids"]
    neg_ids = snap["initial_negative_ids"]
    session = Session(
        session_id=snap["session_id"],
        positive_ids=pos_ids,
        positives=np.stack([features_by_id[p] for p in pos_ids]),
        negative_ids=neg_ids,
        negatives=np.stack([features_by_id[p] for p in neg_ids]),
        config=config,
        base_ensemble=base_ensemble,
    )
    log = store.read_log()
    replayed = replay_log(pos_ids, neg_ids, log)
    session.positive_ids = list(replayed["positive_ids"])
    session.negative_ids = list(replayed["negative_ids"])
    session.removed = dict(replayed["removed"])
    session.promoted_ids = [p for p in session.positive_ids if p not in pos_ids]
    session.feedback_log = list(log)
    session.processed_exemplars = list(dict.fromkeys(e.exemplar_id for e in log))
    session.queries_answered = replayed["queries_answered"]
    session._batch_seq = max((e.batch for e in log), default=0)
    session._neg_version = session._batch_seq
    return session, snap
