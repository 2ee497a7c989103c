"""Seeded synthetic savanna scenes with exact ground truth.

Stands in for real UAV survey imagery: sandy textured background,
elliptical animals with offset shadow ellipses, plus distractors (bushes
with their own shadows, dark burrow holes, bright stones) that feed the
negative pool. Morning images get long shadows, midday images short ones,
and timestamps land in the matching time-of-day windows so period splits
are meaningful.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import InvalidArgumentError
from ..fusion import GroundTruthObject
from ..raster import RasterImage

MORNING_WINDOW = (_dt.time(9, 13), _dt.time(9, 28))
MIDDAY_WINDOW = (_dt.time(13, 8), _dt.time(13, 30))


@dataclass(frozen=True)
class SynthParams:
    image_count: int = 60
    width: int = 512
    height: int = 512
    gsd_cm: float = 4.0
    animals_per_image: int = 3
    animal_length_cm: tuple[float, float] = (150.0, 260.0)
    animal_aspect: tuple[float, float] = (0.38, 0.55)
    light_fur_fraction: float = 0.7
    shadow_darkness: float = 0.27  # brightness multiplier inside shadows
    shadow_length_morning: float = 1.4  # shadow elongation at low sun
    shadow_length_midday: float = 0.75
    shadow_gap_cm: tuple[float, float] = (12.0, 36.0)  # body edge to shadow center
    background_texture_scale_px: int = 48
    background_texture_amp: float = 7.0
    pixel_noise: float = 2.5
    bushes_per_image: int = 14
    holes_per_image: int = 60
    stones_per_image: int = 160
    morning_fraction: float = 0.5
    seed: int = 42

    def __post_init__(self):
        for name in ("image_count", "width", "height"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1")
        if self.gsd_cm <= 0:
            raise InvalidArgumentError("gsd_cm must be > 0")
        for name in ("animals_per_image", "bushes_per_image", "holes_per_image", "stones_per_image"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"{name} must be >= 0")
        if self.animal_length_cm[0] <= 0:
            raise InvalidArgumentError("animal sizes must be > 0")
        max_len_px = self.animal_length_cm[1] / self.gsd_cm
        if max_len_px > min(self.width, self.height):
            raise InvalidArgumentError(
                f"animal length up to {max_len_px:.0f} px exceeds the {self.width}x{self.height} image"
            )


@dataclass(frozen=True)
class SyntheticDataset:
    images: tuple[RasterImage, ...]
    ground_truth: Mapping[str, tuple[GroundTruthObject, ...]] = field(repr=False)
    params: SynthParams

    def all_objects(self) -> list[GroundTruthObject]:
        out: list[GroundTruthObject] = []
        for iid in sorted(self.ground_truth):
            out.extend(self.ground_truth[iid])
        return out


def _value_noise(rng: np.random.Generator, h: int, w: int, scale: int, amp: float) -> np.ndarray:
    """Bilinearly upsampled coarse Gaussian grid: smooth, band-limited texture."""
    gh = max(2, h // scale + 2)
    gw = max(2, w // scale + 2)
    grid = rng.normal(0.0, amp, size=(gh, gw))
    ys = np.linspace(0, gh - 1.001, h)
    xs = np.linspace(0, gw - 1.001, w)
    y0 = ys.astype(int)
    x0 = xs.astype(int)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    tl = grid[np.ix_(y0, x0)]
    tr = grid[np.ix_(y0, x0 + 1)]
    bl = grid[np.ix_(y0 + 1, x0)]
    br = grid[np.ix_(y0 + 1, x0 + 1)]
    return (tl * (1 - fy) * (1 - fx) + tr * (1 - fy) * fx + bl * fy * (1 - fx) + br * fy * fx)


def _ellipse_radius(a: float, b: float, angle: float, direction: float) -> float:
    """Distance from the ellipse center to its edge along ``direction``."""
    psi = direction - angle
    return a * b / np.hypot(b * np.cos(psi), a * np.sin(psi))


def _ellipse_mask(h: int, w: int, cx: float, cy: float, a: float, b: float, angle: float) -> np.ndarray:
    """Boolean mask of an ellipse with semi-axes a, b rotated by ``angle``."""
    x0 = max(0, int(cx - a - b - 2))
    x1 = min(w - 1, int(cx + a + b + 2))
    y0 = max(0, int(cy - a - b - 2))
    y1 = min(h - 1, int(cy + a + b + 2))
    mask = np.zeros((h, w), dtype=bool)
    if x1 < x0 or y1 < y0:
        return mask
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    dx = xs - cx
    dy = ys - cy
    ca, sa = np.cos(angle), np.sin(angle)
    u = (dx * ca + dy * sa) / a
    v = (-dx * sa + dy * ca) / b
    mask[y0 : y1 + 1, x0 : x1 + 1] = u * u + v * v <= 1.0
    return mask


def _paint(canvas: np.ndarray, mask: np.ndarray, color, speckle: np.ndarray | None = None) -> None:
    for c in range(3):
        values = np.full(int(mask.sum()), float(color[c]))
        if speckle is not None:
            values = values * speckle[mask]
        canvas[:, :, c][mask] = values


def _darken(canvas: np.ndarray, mask: np.ndarray, factor: float) -> None:
    canvas[mask] = canvas[mask] * factor


def _timestamp(rng: np.random.Generator, morning: bool, day: int) -> _dt.datetime:
    lo, hi = MORNING_WINDOW if morning else MIDDAY_WINDOW
    lo_s = lo.hour * 3600 + lo.minute * 60
    hi_s = hi.hour * 3600 + hi.minute * 60
    s = int(rng.integers(lo_s, hi_s + 1))
    return _dt.datetime(2014, 5, 12 + day, s // 3600, (s % 3600) // 60, s % 60)


def synth_generate(params: SynthParams) -> SyntheticDataset:
    """Deterministic scene generation: same params give byte-identical images."""
    seeds = np.random.SeedSequence(params.seed).spawn(params.image_count)
    n_morning = int(round(params.image_count * params.morning_fraction))
    images: list[RasterImage] = []
    ground_truth: dict[str, tuple[GroundTruthObject, ...]] = {}

    for idx in range(params.image_count):
        rng = np.random.default_rng(seeds[idx])
        morning = idx < n_morning
        image_id = f"synth{idx:04d}"
        h, w = params.height, params.width
        px_per_cm = 1.0 / params.gsd_cm

        base = np.array([172.0, 148.0, 112.0]) + rng.uniform(-6, 6, size=3)
        canvas = np.empty((h, w, 3), dtype=np.float64)
        texture = _value_noise(rng, h, w, params.background_texture_scale_px, params.background_texture_amp)
        for c in range(3):
            canvas[:, :, c] = base[c] + texture

        sun_az = np.deg2rad((115.0 if morning else 195.0) + rng.uniform(-8, 8))
        shadow_len = params.shadow_length_morning if morning else params.shadow_length_midday

        # -- animals -----------------------------------------------------
        animals = []
        margin = 1.2 * 100 * px_per_cm  # 1.2 m off the border
        for _ in range(params.animals_per_image):
            for _attempt in range(200):
                cx = rng.uniform(margin, w - margin)
                cy = rng.uniform(margin, h - margin)
                if all((cx - ax) ** 2 + (cy - ay) ** 2 > (300 * px_per_cm) ** 2 for ax, ay, *_ in animals):
                    break
            length_px = rng.uniform(*params.animal_length_cm) * px_per_cm
            aspect = rng.uniform(*params.animal_aspect)
            angle = rng.uniform(0, np.pi)
            light = rng.uniform() < params.light_fur_fraction
            animals.append((cx, cy, length_px / 2, length_px * aspect / 2, angle, light))

        bodies = [_ellipse_mask(h, w, cx, cy, a, b, angle) for cx, cy, a, b, angle, _ in animals]
        any_body = np.zeros((h, w), dtype=bool)
        for body in bodies:
            any_body |= body

        # Shadows first (never over a body), then fur on top. The shadow
        # center sits just beyond the body edge along the sun direction;
        # the time of day shows in the shadow's elongation.
        gt_objects = []
        for j, ((cx, cy, a, b, angle, light), body) in enumerate(zip(animals, bodies)):
            if not body.any():
                continue
            gap = rng.uniform(*params.shadow_gap_cm) * px_per_cm
            offset = _ellipse_radius(a, b, angle, sun_az) + gap
            sx = cx + offset * np.cos(sun_az)
            sy = cy + offset * np.sin(sun_az)
            shadow = _ellipse_mask(h, w, sx, sy, a * shadow_len, b * 0.9, angle)
            _darken(canvas, shadow & ~any_body, params.shadow_darkness)

        for j, ((cx, cy, a, b, angle, light), body) in enumerate(zip(animals, bodies)):
            if not body.any():
                continue
            if light:
                fur = np.array([208.0, 196.0, 172.0]) + rng.uniform(-12, 12, size=3)
            else:
                fur = np.array([102.0, 94.0, 78.0]) + rng.uniform(-8, 8, size=3)
            speckle = 1.0 + rng.normal(0.0, 0.06, size=(h, w))
            _paint(canvas, body, fur, speckle)

            ys, xs = np.nonzero(body)
            pix = np.column_stack([xs, ys]).astype(np.int64)
            gt_objects.append(
                GroundTruthObject(
                    object_id=f"{image_id}:gt{j:02d}",
                    image_id=image_id,
                    pixels=pix,
                    centroid=(float(xs.mean()), float(ys.mean())),
                    supporting_volunteers=3,
                    verified="confirmed",
                )
            )

        # Keep distractors out of the animals' labelling neighborhoods.
        def clear_of_animals(x, y, pad_px):
            for cx, cy, a, b, angle, _light in animals:
                if (x - cx) ** 2 + (y - cy) ** 2 < (a + pad_px) ** 2:
                    return False
            return True

        label_pad = 100 * px_per_cm  # merge radius (60 cm) plus slack

        # -- bushes (textured, with their own shadows) ---------------------
        for _ in range(params.bushes_per_image):
            for _attempt in range(50):
                bx = rng.uniform(10, w - 10)
                by = rng.uniform(10, h - 10)
                if clear_of_animals(bx, by, label_pad + 40 * px_per_cm):
                    break
            else:
                continue
            blob = np.zeros((h, w), dtype=bool)
            r_bush = rng.uniform(35, 90) * px_per_cm
            for _k in range(int(rng.integers(3, 6))):
                ox = bx + rng.normal(0, r_bush * 0.4)
                oy = by + rng.normal(0, r_bush * 0.4)
                rr = r_bush * rng.uniform(0.5, 1.0)
                blob |= _ellipse_mask(h, w, ox, oy, rr, rr * rng.uniform(0.6, 1.0), rng.uniform(0, np.pi))
            sx = bx + r_bush * 1.2 * np.cos(sun_az)
            sy = by + r_bush * 1.2 * np.sin(sun_az)
            bush_shadow = _ellipse_mask(h, w, sx, sy, r_bush * 0.8, r_bush * 0.5, sun_az)
            _darken(canvas, bush_shadow & ~blob, params.shadow_darkness + 0.05)
            green = np.array([74.0, 96.0, 58.0]) + rng.uniform(-10, 10, size=3)
            speckle = 1.0 + rng.normal(0.0, 0.15, size=(h, w))
            _paint(canvas, blob, green, speckle)

        # -- dark holes (shadow look-alikes) --------------------------------
        for _ in range(params.holes_per_image):
            for _attempt in range(50):
                hx = rng.uniform(4, w - 4)
                hy = rng.uniform(4, h - 4)
                if clear_of_animals(hx, hy, label_pad):
                    break
            else:
                continue
            r = rng.uniform(12, 32) * px_per_cm
            hole = _ellipse_mask(h, w, hx, hy, r, r * rng.uniform(0.7, 1.0), rng.uniform(0, np.pi))
            _darken(canvas, hole, 0.30)

        # -- bright stones (fur-colored confusers) --------------------------
        for _ in range(params.stones_per_image):
            for _attempt in range(50):
                sx_ = rng.uniform(4, w - 4)
                sy_ = rng.uniform(4, h - 4)
                if clear_of_animals(sx_, sy_, label_pad):
                    break
            else:
                continue
            r = rng.uniform(12, 24) * px_per_cm
            stone = _ellipse_mask(h, w, sx_, sy_, r, r * rng.uniform(0.6, 1.0), rng.uniform(0, np.pi))
            color = np.array([214.0, 203.0, 186.0]) + rng.uniform(-10, 10, size=3)
            _paint(canvas, stone, color)

        canvas += rng.normal(0.0, params.pixel_noise, size=canvas.shape)
        pixels = np.clip(np.rint(canvas), 0, 255).astype(np.uint8)
        images.append(
            RasterImage(
                image_id=image_id,
                pixels=pixels,
                gsd_cm=params.gsd_cm,
                acquired_at=_timestamp(rng, morning, day=idx % 3),
            )
        )
        ground_truth[image_id] = tuple(gt_objects)

    return SyntheticDataset(images=tuple(images), ground_truth=ground_truth, params=params)
