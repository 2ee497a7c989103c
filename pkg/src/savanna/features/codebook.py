"""Visual-word codebook: k-means over flattened patches plus dense assignment."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from ..errors import InvalidArgumentError
from ..raster import RasterImage
from ..validation import check_matrix

_MAGIC = b"SVWC"
_VERSION = 1


def _nearest_center(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Index of the nearest center per row (squared Euclidean, ties -> lowest).

    argmin over ``|c|^2 - 2 x.c`` — the ``|x|^2`` term is constant per row
    and cannot change the winner.
    """
    scores = X @ centers.T
    scores *= -2.0
    scores += (centers * centers).sum(axis=1)[None, :]
    return np.argmin(scores, axis=1)


def _sq_distances_to_assigned(X, centers, assign) -> np.ndarray:
    d = X - centers[assign]
    return (d * d).sum(axis=1)


class Codebook(ClusterMixin, BaseEstimator):
    """k-means visual vocabulary over flattened image patches.

    Lloyd's algorithm with k-means++ seeding; empty clusters are re-seeded
    to the point currently farthest from its center. Training stops once
    the relative distortion improvement drops below ``tol`` or after
    ``max_iter`` passes.

    Fitted attributes: ``centers_`` (k, dim), ``iterations_run_``,
    ``distortion_`` (final sum of squared distances) and
    ``distortion_history_`` (per-iteration, non-increasing).
    """

    def __init__(self, k: int = 100, seed: int = 0, max_iter: int = 100, tol: float = 1e-4):
        self.k = k
        self.seed = seed
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        X = check_matrix("patches", X)
        if self.k < 1:
            raise InvalidArgumentError("k must be >= 1")
        if X.shape[0] < self.k:
            raise InvalidArgumentError(f"need at least k={self.k} patches, got {X.shape[0]}")
        rng = np.random.default_rng(self.seed)
        centers = self._plus_plus_init(X, rng)

        history: list[float] = []
        prev = None
        iterations = 0
        for _ in range(self.max_iter):
            iterations += 1
            assign = _nearest_center(X, centers)
            sq = _sq_distances_to_assigned(X, centers, assign)
            distortion = float(np.maximum(sq, 0.0).sum())
            if prev is not None and distortion > prev * (1 + 1e-9) + 1e-9:
                raise RuntimeError("k-means distortion increased; numerical trouble")
            history.append(distortion)
            if prev is not None and (prev - distortion) < self.tol * prev:
                break
            if distortion == 0.0:
                break
            prev = distortion

            counts = np.bincount(assign, minlength=self.k).astype(np.float64)
            onehot = np.zeros((X.shape[0], self.k), dtype=np.float64)
            onehot[np.arange(X.shape[0]), assign] = 1.0
            sums = onehot.T @ X
            nonempty = counts > 0
            centers = centers.copy()
            centers[nonempty] = sums[nonempty] / counts[nonempty, None]
            empties = np.flatnonzero(~nonempty)
            if empties.size:
                # Re-seed each empty cluster at the current farthest point.
                order = np.argsort(-sq, kind="stable")
                for slot, point in zip(empties, order[: empties.size]):
                    centers[slot] = X[point]

        self.centers_ = centers
        self.iterations_run_ = iterations
        self.distortion_ = history[-1]
        self.distortion_history_ = history
        return self

    def _plus_plus_init(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        n = X.shape[0]
        centers = np.empty((self.k, X.shape[1]), dtype=np.float64)
        first = int(rng.integers(n))
        centers[0] = X[first]
        if self.k == 1:
            return centers
        d2 = ((X - centers[0]) ** 2).sum(axis=1)
        for j in range(1, self.k):
            total = d2.sum()
            if total <= 0:
                idx = int(rng.integers(n))
            else:
                idx = int(rng.choice(n, p=d2 / total))
            centers[j] = X[idx]
            d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))
        return centers

    def predict(self, X) -> np.ndarray:
        X = check_matrix("vectors", X, n_cols=self.centers_.shape[1])
        return _nearest_center(X, self.centers_)

    @property
    def dim(self) -> int:
        return int(self.centers_.shape[1])

    def save(self, path: str | Path) -> None:
        """Binary layout: magic, version, k, dim, seed, then centers as
        little-endian float64, row-major."""
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(struct.pack("<IIIq", _VERSION, self.centers_.shape[0], self.centers_.shape[1], self.seed))
            f.write(self.centers_.astype("<f8").tobytes(order="C"))

    @classmethod
    def load(cls, path: str | Path) -> "Codebook":
        with open(path, "rb") as f:
            magic = f.read(4)
            if magic != _MAGIC:
                raise InvalidArgumentError(f"not a codebook file: bad magic {magic!r}")
            version, k, dim, seed = struct.unpack("<IIIq", f.read(20))
            if version != _VERSION:
                raise InvalidArgumentError(f"unsupported codebook version {version}")
            centers = np.frombuffer(f.read(8 * k * dim), dtype="<f8").reshape(k, dim).copy()
        cb = cls(k=k, seed=seed)
        cb.centers_ = centers
        cb.iterations_run_ = 0
        cb.distortion_ = float("nan")
        cb.distortion_history_ = []
        return cb


def train_codebook(patches, k: int, seed: int, max_iter: int = 100, tol: float = 1e-4) -> Codebook:
    return Codebook(k=k, seed=seed, max_iter=max_iter, tol=tol).fit(patches)


@dataclass(frozen=True)
class WordMap:
    """Dense per-pixel visual-word indices for one image."""

    image_id: str
    words: np.ndarray = field(repr=False)  # (H, W) int32 in [0, k)
    k: int

    @property
    def height(self) -> int:
        return self.words.shape[0]

    @property
    def width(self) -> int:
        return self.words.shape[1]


def assign_words(img: RasterImage, codebook: Codebook, window: int = 25) -> WordMap:
    """Assign every pixel's clamp-padded neighborhood to its nearest word.

    The window around each pixel is flattened in the same plane order as
    :func:`savanna.features.flatten_patch`, so dense maps agree exactly
    with per-patch prediction.
    """
    if window % 2 == 0:
        raise InvalidArgumentError("window must be odd")
    half = window // 2
    h, w = img.height, img.width
    pad = np.pad(img.pixels, ((half, half), (half, half), (0, 0)), mode="edge")
    centers = codebook.centers_
    if centers.shape[1] != window * window * 3:
        raise InvalidArgumentError(
            f"codebook dim {centers.shape[1]} does not match window {window} (expect {window * window * 3})"
        )
    out = np.empty((h, w), dtype=np.int32)
    # Row blocks keep the per-block patch matrix around ~60 MB.
    rows_per_block = max(1, int(60e6 // (w * centers.shape[1] * 8)))
    view_src = np.lib.stride_tricks.sliding_window_view(pad, (window, window), axis=(0, 1))
    # view_src shape: (h, w, 3, window, window); flattening the last three
    # axes yields (plane, row, col) order == flatten_patch order.
    for r0 in range(0, h, rows_per_block):
        r1 = min(h, r0 + rows_per_block)
        block = view_src[r0:r1].reshape((r1 - r0) * w, -1).astype(np.float64)
        out[r0:r1] = _nearest_center(block, centers).reshape(r1 - r0, w).astype(np.int32)
    return WordMap(image_id=img.image_id, words=out, k=centers.shape[0])
