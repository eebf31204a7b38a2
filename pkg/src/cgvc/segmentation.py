"""Per-frame object label maps: PGM mask ingestion and built-in fallbacks."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import InputError, LabelMapError, MissingLabelMap
from .frame_io import VideoMeta

MASK_PATTERN = "frame_{:06d}.pgm"


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Object ids per luma pixel; 0 marks unsegmented pixels."""

    index: int
    labels: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, LabelMap):
            return NotImplemented
        return self.index == other.index and np.array_equal(self.labels, other.labels)

    __hash__ = None


def object_count(maps) -> int:
    """M, the largest object id used anywhere in the sequence."""
    return max((int(m.labels.max()) for m in maps), default=0)


def _read_token(data: bytes, pos: int):
    while True:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        break
    start = pos
    while pos < len(data) and not data[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise LabelMapError("truncated PGM header")
    return data[start:pos], pos


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    magic, pos = _read_token(data, 0)
    if magic != b"P5":
        raise LabelMapError(f"{path}: not a binary PGM (P5)")
    width, pos = _read_token(data, pos)
    height, pos = _read_token(data, pos)
    maxval, pos = _read_token(data, pos)
    width, height, maxval = int(width), int(height), int(maxval)
    if maxval > 255:
        raise LabelMapError(f"{path}: only 8-bit PGM masks are supported")
    pos += 1  # single whitespace byte after maxval
    body = data[pos:pos + width * height]
    if len(body) != width * height:
        raise LabelMapError(f"{path}: truncated PGM payload")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width)


def write_pgm(path, plane: np.ndarray) -> None:
    plane = np.ascontiguousarray(plane, dtype=np.uint8)
    h, w = plane.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(plane.tobytes())


def renumber(planes) -> list[np.ndarray]:
    """Map non-zero ids to 1..M in order of first appearance (frame order, then raster order)."""
    order = []
    seen = set()
    for plane in planes:
        flat = plane.ravel()
        ids, first = np.unique(flat, return_index=True)
        for ident in ids[np.argsort(first)]:
            ident = int(ident)
            if ident and ident not in seen:
                seen.add(ident)
                order.append(ident)
    if len(order) > 255:
        raise LabelMapError(f"{len(order)} distinct object ids exceed the 255 limit")
    lut = np.zeros(256, dtype=np.uint8)
    for new, old in enumerate(order, start=1):
        lut[old] = new
    return [lut[p] for p in planes]


def load_label_maps(directory, meta: VideoMeta) -> list[LabelMap]:
    planes = []
    for t in range(1, meta.frame_count + 1):
        path = os.path.join(directory, MASK_PATTERN.format(t))
        if not os.path.exists(path):
            raise MissingLabelMap(t)
        plane = read_pgm(path)
        if plane.shape != (meta.height, meta.width):
            raise LabelMapError(
                f"{path}: mask is {plane.shape[1]}x{plane.shape[0]}, video is {meta.width}x{meta.height}")
        planes.append(plane)
    return [LabelMap(t, p) for t, p in enumerate(renumber(planes), start=1)]


def save_label_maps(directory, maps) -> None:
    os.makedirs(directory, exist_ok=True)
    for m in maps:
        write_pgm(os.path.join(directory, MASK_PATTERN.format(m.index)), m.labels)


def whole_frame_segmentation(meta: VideoMeta) -> list[LabelMap]:
    ones = np.ones((meta.height, meta.width), dtype=np.uint8)
    return [LabelMap(t, ones) for t in range(1, meta.frame_count + 1)]


def grid_segmentation(meta: VideoMeta, rows: int, cols: int) -> list[LabelMap]:
    if rows < 1 or cols < 1:
        raise InputError("grid rows and cols must be >= 1")
    if rows * cols > 255:
        raise InputError(f"grid {rows}x{cols} needs more than 255 object ids")
    r = np.arange(meta.height) * rows // meta.height
    c = np.arange(meta.width) * cols // meta.width
    labels = (r[:, None] * cols + c[None, :] + 1).astype(np.uint8)
    return [LabelMap(t, labels) for t in range(1, meta.frame_count + 1)]


def parse_segmentation(value: str, meta: VideoMeta, masks_dir=None) -> list[LabelMap]:
    """Resolve a ``--segmentation`` choice: ``masks``, ``whole`` or ``grid:RxC``."""
    if value == "masks":
        if not masks_dir:
            raise InputError("--segmentation masks requires --masks DIR")
        return load_label_maps(masks_dir, meta)
    if value == "whole":
        return whole_frame_segmentation(meta)
    if value.startswith("grid:"):
        try:
            rows, cols = (int(x) for x in value[5:].lower().split("x"))
        except ValueError:
            raise InputError(f"bad grid spec {value!r}, expected grid:RxC") from None
        return grid_segmentation(meta, rows, cols)
    raise InputError(f"unknown segmentation {value!r}")
