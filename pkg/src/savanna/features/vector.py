"""The per-proposal descriptor container and feature-type combination."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgumentError


@dataclass(frozen=True)
class FeatureVector:
    """A single proposal's descriptor (raw counts or normalized values)."""

    proposal_id: str
    kind: str  # hoc | bovw | combined
    values: np.ndarray = field(repr=False)


def combine(hoc: FeatureVector, bovw: FeatureVector) -> FeatureVector:
    """Concatenate per-type normalized descriptors and re-normalize to unit l2.

    Both inputs are expected to have been through the z-score + unit-norm
    chain already; the concatenation is rescaled so the result is unit
    length again.
    """
    if hoc.proposal_id != bovw.proposal_id:
        raise InvalidArgumentError(f"proposal ids differ: {hoc.proposal_id!r} vs {bovw.proposal_id!r}")
    values = np.concatenate([np.asarray(hoc.values, float), np.asarray(bovw.values, float)])
    norm = float(np.linalg.norm(values))
    if norm > 0:
        values = values / norm
    return FeatureVector(proposal_id=hoc.proposal_id, kind="combined", values=values)


def combine_matrices(hoc_rows: np.ndarray, bovw_rows: np.ndarray) -> np.ndarray:
    """Row-wise version of :func:`combine` for already-normalized matrices."""
    if hoc_rows.shape[0] != bovw_rows.shape[0]:
        raise InvalidArgumentError("matrices must have the same number of rows")
    out = np.concatenate([hoc_rows, bovw_rows], axis=1).astype(np.float64)
    norms = np.linalg.norm(out, axis=1)
    nz = norms > 0
    if not np.all(nz):
        warnings.warn("zero rows left unnormalized in combine_matrices")
    out[nz] = out[nz] / norms[nz, None]
    return out
