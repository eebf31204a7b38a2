"""Deterministic synthetic test videos with matching object masks."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .frame_io import RgbFrame, VideoMeta, rgb_to_yuv, write_video
from .segmentation import LabelMap, save_label_maps

KINDS = ("constant", "colorflip", "movingblock", "noise")

BACKGROUND = (96, 144, 96)
COLOR_BEFORE = (208, 64, 56)
COLOR_AFTER = (56, 88, 208)
KEEPER = (232, 232, 232)
KEEP = 2


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str
    meta: VideoMeta
    seed: int = 0
    flip_at: int = 100
    region: tuple | None = None      # (x0, y0, x1, y1), even coordinates, exclusive end
    velocity: tuple = (2, 0)
    noise: int = 0                   # uniform RGB noise amplitude

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown synthetic kind {self.kind!r}; choose from {KINDS}")
        if self.noise < 0:
            raise InputError("noise amplitude must be >= 0")

    def object_region(self):
        if self.region is not None:
            x0, y0, x1, y1 = self.region
        else:
            w, h = self.meta.width, self.meta.height
            x0, y0, x1, y1 = w // 4, h // 4, 3 * w // 4, 3 * h // 4
        x0, y0, x1, y1 = (v // 2 * 2 for v in (x0, y0, x1, y1))
        if not (0 <= x0 < x1 <= self.meta.width and 0 <= y0 < y1 <= self.meta.height):
            raise InputError(f"object region {self.region} does not fit the frame")
        return x0, y0, x1, y1


def _background(w, h) -> np.ndarray:
    ramp = np.linspace(-24.0, 24.0, w)[None, :] + np.linspace(-8.0, 8.0, h)[:, None]
    return np.asarray(BACKGROUND, dtype=np.float64)[None, None, :] + ramp[..., None]


def _paint(img, box, colour, texture=True):
    x0, y0, x1, y1 = box
    fill = np.asarray(colour, dtype=np.float64)[None, None, :]
    if texture:
        tex = np.linspace(-10.0, 10.0, y1 - y0)[:, None, None]
        img[y0:y1, x0:x1] = fill + tex
    else:
        img[y0:y1, x0:x1] = fill


def synth(spec: SyntheticSpec):
    """Return ``(meta, frames, masks)`` for ``spec``; same spec, same bytes."""
    meta = spec.meta
    w, h, T = meta.width, meta.height, meta.frame_count
    rng = np.random.default_rng(spec.seed)
    base = _background(w, h)
    frames, masks = [], []
    for t in range(1, T + 1):
        img = base.copy()
        labels = np.ones((h, w), dtype=np.uint8)
        if spec.kind == "colorflip":
            x0, y0, x1, y1 = spec.object_region()
            colour = COLOR_BEFORE if t < spec.flip_at else COLOR_AFTER
            _paint(img, (x0, y0, x1, y1), colour)
            # A small corner patch keeps its colour across the flip so the object never changes completely.
            _paint(img, (x0, y0, min(x0 + KEEP, x1), min(y0 + KEEP, y1)), KEEPER, texture=False)
            labels[y0:y1, x0:x1] = 2
        elif spec.kind == "movingblock":
            x0, y0, x1, y1 = spec.object_region()
            bw, bh = x1 - x0, y1 - y0
            dx = (x0 + spec.velocity[0] * (t - 1)) % (w - bw + 1) // 2 * 2
            dy = (y0 + spec.velocity[1] * (t - 1)) % (h - bh + 1) // 2 * 2
            _paint(img, (dx, dy, dx + bw, dy + bh), COLOR_BEFORE)
            labels[dy:dy + bh, dx:dx + bw] = 2
        amplitude = spec.noise or (12 if spec.kind == "noise" else 0)
        if amplitude:
            img = img + rng.integers(-amplitude, amplitude + 1, size=img.shape)
        rgb = np.clip(np.rint(img), 0, 255).astype(np.uint8)
        frames.append(rgb_to_yuv(RgbFrame.from_array(t, rgb)))
        masks.append(LabelMap(t, labels))
    return meta, frames, masks


def write_synth(spec: SyntheticSpec, out_dir) -> tuple[str, str]:
    """Write ``video.y4m`` and ``masks/frame_%06d.pgm`` under ``out_dir``."""
    meta, frames, masks = synth(spec)
    os.makedirs(out_dir, exist_ok=True)
    video_path = os.path.join(out_dir, "video.y4m")
    mask_dir = os.path.join(out_dir, "masks")
    write_video(frames, video_path, "y4m", meta)
    save_label_maps(mask_dir, masks)
    return video_path, mask_dir
