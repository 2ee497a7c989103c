"""Image representation and the pixel-level operations behind proposal generation.

Conventions used throughout the package:

* images are RGB ``uint8`` arrays of shape ``(height, width, 3)``;
* scalar maps (value channel, edge magnitude) are float64 arrays of the
  same height/width; binary masks are boolean arrays;
* coordinates are ``(x, y)`` pairs with ``x`` the column and ``y`` the row.

All functions here are pure: same input, same output, no shared state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from ._union_find import DisjointSet
from .errors import InvalidArgumentError
from .validation import check_image_pixels, check_positive


@dataclass(frozen=True)
class RasterImage:
    """An RGB survey image plus its ground sampling distance.

    ``gsd_cm`` is the physical size of one pixel on the ground in cm/pixel;
    ``acquired_at`` is the acquisition timestamp when known.
    """

    image_id: str
    pixels: np.ndarray = field(repr=False)
    gsd_cm: float
    acquired_at: datetime | None = None

    def __post_init__(self):
        object.__setattr__(self, "pixels", check_image_pixels(self.pixels))
        check_positive("gsd_cm", self.gsd_cm)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def load_image(path: str | Path, gsd_cm: float, acquired_at: datetime | None = None) -> RasterImage:
    """Read a PNG (or any PIL-decodable file); the image id is the file stem."""
    from PIL import Image

    path = Path(path)
    with Image.open(path) as im:
        pixels = np.asarray(im.convert("RGB"))
    return RasterImage(image_id=path.stem, pixels=pixels, gsd_cm=gsd_cm, acquired_at=acquired_at)


def value_channel(img: RasterImage) -> np.ndarray:
    """HSV value per pixel: the channel-wise maximum, in [0, 255]."""
    return img.pixels.max(axis=2).astype(np.float64)


def sobel_blue(img: RasterImage) -> np.ndarray:
    """Gradient magnitude of the 3x3 Sobel kernels on the blue channel.

    Borders are handled with clamp-to-edge padding so the output has the
    same shape as the input.
    """
    blue = img.pixels[:, :, 2].astype(np.float64)
    p = np.pad(blue, 1, mode="edge")
    gx = (p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:]) - (p[:-2, :-2] + 2.0 * p[1:-1, :-2] + p[2:, :-2])
    gy = (p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:]) - (p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:])
    return np.hypot(gx, gy)


def threshold(values: np.ndarray, t: float, direction: str) -> np.ndarray:
    """Binarize a scalar map with a strict comparison.

    ``direction="below"`` keeps values < t (dark shadows on the value
    channel); ``"above"`` keeps values > t (strong edge responses).
    """
    if direction == "below":
        return values < t
    if direction == "above":
        return values > t
    raise InvalidArgumentError(f"direction must be 'below' or 'above', got {direction!r}")


@dataclass(frozen=True)
class ConnectedRegion:
    """A maximal connected set of mask pixels.

    ``pixels`` is an (N, 2) int array of (x, y) coordinates in scanline
    order; ``centroid`` is their arithmetic mean.
    """

    pixels: np.ndarray = field(repr=False)
    area: int
    centroid: tuple[float, float]
    bbox: tuple[int, int, int, int]  # (x_min, y_min, x_max, y_max)


def _neighbor_offsets(connectivity: int) -> list[tuple[int, int]]:
    if connectivity == 4:
        return [(0, 1), (1, 0)]
    if connectivity == 8:
        return [(0, 1), (1, 0), (1, 1), (1, -1)]
    raise InvalidArgumentError(f"connectivity must be 4 or 8, got {connectivity!r}")


def connected_components(mask: np.ndarray, connectivity: int = 8) -> list[ConnectedRegion]:
    """Partition the set bits of a boolean mask into maximal connected regions.

    Regions are returned in scanline order of their first pixel, and each
    region's pixel list is itself scanline ordered, so the output is fully
    deterministic.
    """
    offsets = _neighbor_offsets(connectivity)
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise InvalidArgumentError(f"mask must be 2-D, got shape {mask.shape}")
    h, w = mask.shape
    flat = np.flatnonzero(mask.ravel())  # ascending == scanline order
    n = flat.size
    if n == 0:
        return []

    ds = DisjointSet(n)
    # Forward-neighbor pairs only; union is symmetric so this covers the graph.
    for dy, dx in offsets:
        y0, y1 = max(0, -dy), min(h, h - dy)
        x0, x1 = max(0, -dx), min(w, w - dx)
        both = mask[y0:y1, x0:x1] & mask[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
        ys, xs = np.nonzero(both)
        if ys.size == 0:
            continue
        fa = (ys + y0) * w + (xs + x0)
        fb = (ys + y0 + dy) * w + (xs + x0 + dx)
        ca = np.searchsorted(flat, fa).tolist()
        cb = np.searchsorted(flat, fb).tolist()
        union = ds.union
        for a, b in zip(ca, cb):
            union(a, b)

    roots = np.fromiter((ds.find(i) for i in range(n)), dtype=np.int64, count=n)
    _, first_pos, inverse = np.unique(roots, return_index=True, return_inverse=True)
    region_rank = np.argsort(np.argsort(first_pos))  # unique-label -> output order
    order = region_rank[inverse]

    xs = (flat % w).astype(np.int64)
    ys = (flat // w).astype(np.int64)
    regions: list[ConnectedRegion] = []
    sort_idx = np.argsort(order, kind="stable")
    counts = np.bincount(order)
    start = 0
    for c in counts:
        members = sort_idx[start : start + c]
        start += c
        px = xs[members]
        py = ys[members]
        regions.append(
            ConnectedRegion(
                pixels=np.column_stack([px, py]),
                area=int(c),
                centroid=(float(px.mean()), float(py.mean())),
                bbox=(int(px.min()), int(py.min()), int(px.max()), int(py.max())),
            )
        )
    return regions


def downsample(img: RasterImage, factor: int) -> RasterImage:
    """Reduce resolution by block averaging; gsd_cm is multiplied by ``factor``.

    Each output pixel is the rounded (half-up) mean of a factor x factor
    block; trailing partial blocks average whatever pixels exist.
    """
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise InvalidArgumentError(f"factor must be a positive integer, got {factor!r}")
    if factor == 1:
        return RasterImage(img.image_id, img.pixels.copy(), img.gsd_cm, img.acquired_at)
    h, w = img.height, img.width
    row_idx = np.arange(0, h, factor)
    col_idx = np.arange(0, w, factor)
    sums = np.add.reduceat(np.add.reduceat(img.pixels.astype(np.float64), row_idx, axis=0), col_idx, axis=1)
    row_counts = np.minimum(row_idx + factor, h) - row_idx
    col_counts = np.minimum(col_idx + factor, w) - col_idx
    counts = np.outer(row_counts, col_counts)[:, :, None]
    out = np.floor(sums / counts + 0.5).astype(np.uint8)
    return RasterImage(img.image_id, out, img.gsd_cm * factor, img.acquired_at)


def clamp_window(pixels: np.ndarray, cx: int, cy: int, window: int) -> np.ndarray:
    """Extract a window x window neighborhood centered at (cx, cy).

    Out-of-bounds coordinates replicate the nearest edge pixel, so the
    result always has exactly window**2 samples.
    """
    if window % 2 == 0 or window < 1:
        raise InvalidArgumentError(f"window must be odd and positive, got {window}")
    h, w = pixels.shape[0], pixels.shape[1]
    half = window // 2
    ys = np.clip(np.arange(cy - half, cy + half + 1), 0, h - 1)
    xs = np.clip(np.arange(cx - half, cx + half + 1), 0, w - 1)
    return pixels[np.ix_(ys, xs)]
