"""Per-frame control priors for non-keyframes: the luma plane, or a binary edge map."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .frame_io import Frame


class PriorKind(enum.IntEnum):
    LUMA = 0
    EDGE = 1

    @classmethod
    def parse(cls, text: str) -> "PriorKind":
        try:
            return cls[text.upper()]
        except KeyError:
            raise InputError(f"unknown prior kind {text!r}") from None


@dataclass(frozen=True, eq=False)
class PriorFrame:
    index: int
    plane: np.ndarray
    kind: PriorKind

    def __eq__(self, other):
        if not isinstance(other, PriorFrame):
            return NotImplemented
        return (self.index, self.kind) == (other.index, other.kind) and np.array_equal(self.plane, other.plane)

    __hash__ = None


def extract_luma_prior(frame: Frame) -> PriorFrame:
    return PriorFrame(frame.index, frame.y.copy(), PriorKind.LUMA)


def extract_edge_prior(frame: Frame, threshold: int = 128) -> PriorFrame:
    """Sobel magnitude |gx| + |gy| on luma (edge-replicated border), thresholded to {0, 255}."""
    if not 1 <= threshold <= 1020:
        raise InputError(f"edge threshold must be in [1, 1020], got {threshold}")
    p = np.pad(frame.y.astype(np.int32), 1, mode="edge")
    h, w = frame.y.shape

    def at(dy, dx):
        return p[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]

    gx = (at(-1, 1) + 2 * at(0, 1) + at(1, 1)) - (at(-1, -1) + 2 * at(0, -1) + at(1, -1))
    gy = (at(1, -1) + 2 * at(1, 0) + at(1, 1)) - (at(-1, -1) + 2 * at(-1, 0) + at(-1, 1))
    edges = np.where(np.abs(gx) + np.abs(gy) >= threshold, 255, 0).astype(np.uint8)
    return PriorFrame(frame.index, edges, PriorKind.EDGE)


def extract_prior(frame: Frame, kind: PriorKind, edge_threshold: int = 128) -> PriorFrame:
    if kind == PriorKind.LUMA:
        return extract_luma_prior(frame)
    return extract_edge_prior(frame, edge_threshold)


def prior_to_frame(prior: PriorFrame) -> Frame:
    """Monochrome carrier frame for codec transport (chroma fixed at 128)."""
    h, w = prior.plane.shape
    gray = np.full((h // 2, w // 2), 128, dtype=np.uint8)
    return Frame(prior.index, prior.plane, gray, gray)


def frame_to_prior(frame: Frame, kind: PriorKind) -> PriorFrame:
    return PriorFrame(frame.index, frame.y, kind)
