"""Human-in-the-loop refinement: surface top-scoring negatives, apply verdicts.

A session walks the positive exemplars one at a time. For each exemplar a
model is trained against the current negative pool and the top-scoring
negatives are shown to the screener, who marks each as background (keep),
animal (remove from negatives, optionally promote to a future exemplar) or
unclear (remove outright). The feedback log is append-only and replayable.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .detector import EnsembleConfig, ExemplarEnsemble, build_ensemble, train_exemplar
from .errors import ConflictError, InvalidArgumentError, SessionComplete, VerdictNotInQueryError
from .validation import check_matrix

VERDICTS = ("background", "animal", "unclear")


@dataclass(frozen=True)
class QueryItem:
    proposal_id: str
    score: float
    chip_ref: str


@dataclass(frozen=True)
class Query:
    query_id: str
    exemplar_id: str
    items: tuple[QueryItem, ...]  # sorted by (score desc, proposal_id asc)


@dataclass(frozen=True)
class Verdict:
    proposal_id: str
    decision: str  # background | animal | unclear
    promote_to_exemplar: bool = False

    def __post_init__(self):
        if self.decision not in VERDICTS:
            raise InvalidArgumentError(f"decision must be one of {VERDICTS}, got {self.decision!r}")


@dataclass(frozen=True)
class LogEntry:
    """One screener judgement; ``batch`` groups entries applied together."""

    timestamp: str
    proposal_id: str
    decision: str
    promote: bool
    exemplar_id: str
    query_id: str
    batch: int


@dataclass(frozen=True)
class SessionConfig:
    query_size: int = 8
    exemplar_order: str = "confusion"  # confusion | insertion
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)


class Session:
    """Mutable active-learning state over feature pools.

    Pools are kept as id lists plus aligned feature rows; they stay
    disjoint, and everything removed is tracked so that
    ``pools + removed == initial proposals`` at all times.
    """

    def __init__(
        self,
        session_id: str,
        positive_ids: Sequence[str],
        positives: np.ndarray,
        negative_ids: Sequence[str],
        negatives: np.ndarray,
        config: SessionConfig | None = None,
        base_ensemble: ExemplarEnsemble | None = None,
    ):
        self.session_id = session_id
        self.config = config or SessionConfig()
        positives = check_matrix("positives", positives)
        negatives = check_matrix("negatives", negatives, n_cols=positives.shape[1])
        if len(positive_ids) != positives.shape[0] or len(negative_ids) != negatives.shape[0]:
            raise InvalidArgumentError("id lists must align with feature rows")
        overlap = set(positive_ids) & set(negative_ids)
        if overlap:
            raise InvalidArgumentError(f"pools are not disjoint: {sorted(overlap)[:5]}")

        self._features: dict[str, np.ndarray] = {}
        for pid, row in zip(positive_ids, positives):
            self._features[str(pid)] = row
        for pid, row in zip(negative_ids, negatives):
            self._features[str(pid)] = row

        self.positive_ids: list[str] = [str(p) for p in positive_ids]
        self.negative_ids: list[str] = [str(p) for p in negative_ids]
        self.initial_positive_ids = tuple(self.positive_ids)
        self.initial_negative_ids = tuple(self.negative_ids)
        self.removed: dict[str, str] = {}  # proposal_id -> unclear | animal_unpromoted
        self.processed_exemplars: list[str] = []
        self.pending_query: Query | None = None
        self.feedback_log: list[LogEntry] = []
        self.promoted_ids: list[str] = []
        self.queries_answered = 0
        self._batch_seq = 0
        self._neg_version = 0
        self._model_cache: dict[str, tuple[int, object]] = {}
        self._exemplar_order = self._compute_order(base_ensemble)

    # -- pools ----------------------------------------------------------

    def features_of(self, ids: Iterable[str]) -> np.ndarray:
        ids = list(ids)
        if not ids:
            return np.empty((0, next(iter(self._features.values())).shape[0]))
        return np.stack([self._features[i] for i in ids])

    @property
    def judged_ids(self) -> set[str]:
        return {e.proposal_id for e in self.feedback_log}

    def counts(self) -> dict[str, int]:
        return {
            "positives": len(self.positive_ids),
            "negatives": len(self.negative_ids),
            "promoted": len(self.promoted_ids),
            "removed_unclear": sum(1 for r in self.removed.values() if r == "unclear"),
            "queries_answered": self.queries_answered,
        }

    # -- exemplar ordering ------------------------------------------------

    def _compute_order(self, base_ensemble: ExemplarEnsemble | None) -> list[str]:
        order = list(self.initial_positive_ids)
        if self.config.exemplar_order == "insertion" or not self.negative_ids:
            return order
        if self.config.exemplar_order != "confusion":
            raise InvalidArgumentError("exemplar_order must be 'confusion' or 'insertion'")
        if base_ensemble is None:
            base_ensemble = build_ensemble(
                self.features_of(self.positive_ids),
                self.features_of(self.negative_ids),
                self.config.ensemble,
                positive_ids=self.positive_ids,
            )
        members = {m.exemplar_id: m for m in base_ensemble.members_}
        neg = self.features_of(self.negative_ids)
        confusion: dict[str, int] = {}
        for pid in order:
            member = members.get(pid)
            confusion[pid] = int((member.calibrated_scores(neg) > 0).sum()) if member else 0
        # Most-confused exemplars first; stable sort keeps insertion order on ties.
        return sorted(order, key=lambda pid: -confusion[pid])

    # -- protocol ---------------------------------------------------------

    def _exemplar_model(self, exemplar_id: str):
        cached = self._model_cache.get(exemplar_id)
        if cached and cached[0] == self._neg_version:
            return cached[1]
        negatives = self.features_of(self.negative_ids)
        model = train_exemplar(
            self._features[exemplar_id],
            negatives,
            self.config.ensemble.c_value,
            self.config.ensemble.weight_ratio,
            exemplar_id=exemplar_id,
            kkt_tol=self.config.ensemble.kkt_tol,
            max_epochs=self.config.ensemble.max_epochs,
        )
        self._model_cache[exemplar_id] = (self._neg_version, model)
        return model

    def next_query(self) -> Query:
        """Train (or reuse) the next exemplar's model and surface its top negatives."""
        if self.pending_query is not None:
            raise ConflictError("a query is already pending; apply feedback first")
        remaining = [e for e in self._exemplar_order if e not in self.processed_exemplars]
        if not remaining:
            raise SessionComplete(f"session {self.session_id} has processed every exemplar")
        exemplar_id = remaining[0]
        model = self._exemplar_model(exemplar_id)

        candidates = [p for p in self.negative_ids if p not in self.judged_ids]
        items: list[QueryItem] = []
        if candidates:
            scores = model.calibrated_scores(self.features_of(candidates))
            ranked = sorted(zip(candidates, scores.tolist()), key=lambda t: (-t[1], t[0]))
            items = [
                QueryItem(proposal_id=pid, score=float(s), chip_ref=f"chips/{pid}")
                for pid, s in ranked[: self.config.query_size]
            ]
        query = Query(
            query_id=f"{self.session_id}:q{self.queries_answered}",
            exemplar_id=exemplar_id,
            items=tuple(items),
        )
        self.pending_query = query
        return query

    def apply_feedback(self, verdicts: Sequence[Verdict]) -> dict:
        """Apply verdicts for the pending query; returns a delta report."""
        if self.pending_query is None:
            raise ConflictError("no pending query")
        query = self.pending_query
        queried = {item.proposal_id for item in query.items}
        seen: set[str] = set()
        for v in verdicts:
            if v.proposal_id not in queried:
                raise VerdictNotInQueryError(f"verdict for {v.proposal_id!r} which is not in the pending query")
            if v.proposal_id in seen:
                raise InvalidArgumentError(f"duplicate verdict for {v.proposal_id!r}")
            seen.add(v.proposal_id)

        self._batch_seq += 1
        now = _dt.datetime.now(_dt.timezone.utc).isoformat()
        moved_positive: list[str] = []
        removed_unclear: list[str] = []
        removed_animal: list[str] = []
        for v in verdicts:
            if v.decision == "animal":
                self.negative_ids.remove(v.proposal_id)
                if v.promote_to_exemplar:
                    self.positive_ids.append(v.proposal_id)
                    self.promoted_ids.append(v.proposal_id)
                    moved_positive.append(v.proposal_id)
                else:
                    self.removed[v.proposal_id] = "animal_unpromoted"
                    removed_animal.append(v.proposal_id)
            elif v.decision == "unclear":
                self.negative_ids.remove(v.proposal_id)
                self.removed[v.proposal_id] = "unclear"
                removed_unclear.append(v.proposal_id)
            self.feedback_log.append(
                LogEntry(
                    timestamp=now,
                    proposal_id=v.proposal_id,
                    decision=v.decision,
                    promote=v.promote_to_exemplar and v.decision == "animal",
                    exemplar_id=query.exemplar_id,
                    query_id=query.query_id,
                    batch=self._batch_seq,
                )
            )

        anything_removed = bool(moved_positive or removed_unclear or removed_animal)
        if anything_removed:
            self._neg_version += 1
            # Retrain the screened exemplar without the confusing examples.
            self._exemplar_model(query.exemplar_id)

        self.processed_exemplars.append(query.exemplar_id)
        self.pending_query = None
        self.queries_answered += 1
        return {
            "query_id": query.query_id,
            "exemplar_id": query.exemplar_id,
            "promoted": moved_positive,
            "removed_unclear": removed_unclear,
            "removed_animal": removed_animal,
            "counts": self.counts(),
        }

    def finalize(self) -> tuple[ExemplarEnsemble, dict]:
        """Build a fresh ensemble from the current pools (callable anytime)."""
        from .errors import TrainingFailureError

        if not self.positive_ids:
            raise TrainingFailureError("positive pool is empty; nothing to train")
        ensemble = build_ensemble(
            self.features_of(self.positive_ids),
            self.features_of(self.negative_ids),
            self.config.ensemble,
            positive_ids=self.positive_ids,
        )
        report = dict(self.counts())
        report["members"] = len(ensemble.members_)
        report["dropped"] = list(ensemble.dropped_)
        return ensemble, report


def simulate_user(
    session: Session,
    oracle: Mapping[str, bool] | Callable[[str], bool],
    budget: int,
) -> dict:
    """Answer queries from planted ground truth (the test double for a human).

    The oracle maps proposal id -> is-animal; animals are always promoted.
    Returns counts of recovered false negatives.
    """
    lookup = oracle if callable(oracle) else oracle.__getitem__
    recovered: list[str] = []
    queries_run = 0
    for _ in range(budget):
        try:
            query = session.next_query()
        except SessionComplete:
            break
        verdicts = []
        for item in query.items:
            is_animal = bool(lookup(item.proposal_id))
            verdicts.append(
                Verdict(
                    proposal_id=item.proposal_id,
                    decision="animal" if is_animal else "background",
                    promote_to_exemplar=is_animal,
                )
            )
            if is_animal:
                recovered.append(item.proposal_id)
        session.apply_feedback(verdicts)
        queries_run += 1
    return {
        "queries_run": queries_run,
        "recovered": recovered,
        "n_recovered": len(recovered),
        "counts": session.counts(),
    }


def replay_log(
    initial_positive_ids: Sequence[str],
    initial_negative_ids: Sequence[str],
    log: Iterable[LogEntry],
) -> dict:
    """Recompute final pool membership from the initial pools plus the log."""
    positives = list(initial_positive_ids)
    negatives = list(initial_negative_ids)
    removed: dict[str, str] = {}
    queries = set()
    for entry in log:
        queries.add(entry.query_id)
        if entry.decision == "animal":
            negatives.remove(entry.proposal_id)
            if entry.promote:
                positives.append(entry.proposal_id)
            else:
                removed[entry.proposal_id] = "animal_unpromoted"
        elif entry.decision == "unclear":
            negatives.remove(entry.proposal_id)
            removed[entry.proposal_id] = "unclear"
    return {
        "positive_ids": positives,
        "negative_ids": negatives,
        "removed": removed,
        "queries_answered": len(queries),
    }


def audit_session(session: Session) -> bool:
    """True when replaying the log reproduces the live pool membership exactly."""
    replayed = replay_log(session.initial_positive_ids, session.initial_negative_ids, session.feedback_log)
    return (
        replayed["positive_ids"] == session.positive_ids
        and replayed["negative_ids"] == session.negative_ids
        and replayed["removed"] == session.removed
    )


def log_entry_to_dict(entry: LogEntry) -> dict:
    return {
        "timestamp": entry.timestamp,
        "proposal_id": entry.proposal_id,
        "decision": entry.decision,
        "promote": entry.promote,
        "exemplar_id": entry.exemplar_id,
        "query_id": entry.query_id,
        "batch": entry.batch,
    }


def log_entry_from_dict(d: Mapping) -> LogEntry:
    return LogEntry(
        timestamp=d["timestamp"],
        proposal_id=d["proposal_id"],
        decision=d["decision"],
        promote=bool(d["promote"]),
        exemplar_id=d["exemplar_id"],
        query_id=d["query_id"],
        batch=int(d["batch"]),
    )
