"""Dataset ingestion, pipeline stages, session persistence and the HTTP API."""

from .manifest import DatasetManifest, IngestReport, ingest_dataset, write_synthetic_dataset
from .sessions import SessionStore, restore_session
from .stages import STAGES, run_codebook, run_features, run_fuse, run_proposals, run_train
from .app import WorkbenchService, create_app, serve

__all__ = [
    "DatasetManifest",
    "IngestReport",
    "ingest_dataset",
    "write_synthetic_dataset",
    "SessionStore",
    "restore_session",
    "STAGES",
    "run_fuse",
    "run_proposals",
    "run_codebook",
    "run_features",
    "run_train",
    "WorkbenchService",
    "create_app",
    "serve",
]
