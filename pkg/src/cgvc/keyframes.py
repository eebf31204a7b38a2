"""Colour-distance-guided keyframe selection.

Object-level joint RGB histograms (16 bins per channel) are compared with the
positive histogram distance; frames where some object gains at least ``tau`` of
new colour mass become candidates, and a Gaussian KDE over the candidates picks
the next keyframe. A forward pass from frame 1 and a backward pass from frame T
each cover half of the sequence.
"""

from __future__ import annotations

import decimal
import math
from collections import Counter
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction

import numpy as np

from .errors import InputError
from .frame_io import yuv_to_rgb
from .segmentation import object_count

BINS_PER_CHANNEL = 16
N_CELLS = BINS_PER_CHANNEL ** 3
FORWARD = 1
BACKWARD = -1


@dataclass(frozen=True)
class SelectionParams:
    w_min: int = 32
    w_max: int = 85
    tau: float = 0.4
    kde_bandwidth: float = 5.0
    candidate_dedup: bool = False

    def __post_init__(self):
        if not 1 <= self.w_min <= self.w_max:
            raise InputError(f"need 1 <= w_min <= w_max, got {self.w_min}, {self.w_max}")
        if not self.tau > 0:
            raise InputError(f"tau must be positive, got {self.tau}")
        if not self.kde_bandwidth > 0:
            raise InputError("kde_bandwidth must be positive")


@dataclass(frozen=True)
class KeyframePlan:
    keyframes: tuple
    frame_count: int

    def __post_init__(self):
        kf = self.keyframes
        if not kf or kf[0] != 1 or kf[-1] != self.frame_count:
            raise InputError(f"plan must start at 1 and end at {self.frame_count}")
        if any(b <= a for a, b in zip(kf, kf[1:])):
            raise InputError("plan indices must be strictly increasing")

    @property
    def clips(self) -> list[tuple[int, int]]:
        return list(zip(self.keyframes, self.keyframes[1:]))

    @property
    def non_keyframes(self) -> list[int]:
        keys = set(self.keyframes)
        return [t for t in range(1, self.frame_count + 1) if t not in keys]

    def to_json(self) -> dict:
        return {"keyframes": list(self.keyframes)}

    @classmethod
    def from_json(cls, doc: dict, frame_count: int | None = None) -> "KeyframePlan":
        kf = tuple(int(k) for k in doc["keyframes"])
        return cls(kf, frame_count if frame_count is not None else kf[-1])


def _bin_index(rgb) -> np.ndarray:
    r = rgb.r.astype(np.int32) // BINS_PER_CHANNEL
    g = rgb.g.astype(np.int32) // BINS_PER_CHANNEL
    b = rgb.b.astype(np.int32) // BINS_PER_CHANNEL
    return (r * BINS_PER_CHANNEL + g) * BINS_PER_CHANNEL + b


def _frame_counts(frame, labels: np.ndarray, n_objects: int) -> np.ndarray:
    """Histogram counts of shape (n_objects, N_CELLS); row m-1 is object m."""
    cells = _bin_index(yuv_to_rgb(frame)).ravel()
    lab = labels.ravel().astype(np.int64)
    keep = (lab >= 1) & (lab <= n_objects)
    flat = (lab[keep] - 1) * N_CELLS + cells[keep]
    counts = np.bincount(flat, minlength=n_objects * N_CELLS)
    return counts.reshape(n_objects, N_CELLS)


def object_histogram(frame, label_map, object_id: int, n_objects: int = 255) -> np.ndarray:
    """L1-normalised 4096-cell histogram of one object's pixels.

    An object with no pixels in this frame yields the all-zero EMPTY histogram.
    """
    if not 1 <= object_id <= n_objects:
        raise InputError(f"object id {object_id} outside 1..{n_objects}")
    mask = label_map.labels == object_id
    cells = _bin_index(yuv_to_rgb(frame))[mask]
    hist = np.bincount(cells, minlength=N_CELLS).astype(np.float64)
    total = hist.sum()
    return hist / total if total else hist


def is_empty(hist) -> bool:
    return not np.any(hist)


def positive_histogram_distance(h_prev, h_cand) -> float:
    """Colour mass of ``h_cand`` not covered by ``h_prev``; 0 if either is EMPTY."""
    if is_empty(h_prev) or is_empty(h_cand):
        return 0.0
    gain = np.maximum(0.0, np.asarray(h_cand, dtype=np.float64) - np.asarray(h_prev, dtype=np.float64))
    # The exact value never exceeds 1; clamp away summation round-off.
    return min(1.0, math.fsum(gain))


class HistogramTable:
    """Integer histogram counts for every (frame, object) pair.

    Counts are kept unnormalised so threshold tests can be done exactly.
    """

    def __init__(self, counts: np.ndarray):
        self.counts = counts  # (T, M, N_CELLS)
        self.totals = counts.sum(axis=2, dtype=np.int64)

    @classmethod
    def build(cls, frames, label_maps, n_objects: int | None = None) -> "HistogramTable":
        if len(frames) != len(label_maps):
            raise InputError(f"{len(frames)} frames but {len(label_maps)} label maps")
        m = object_count(label_maps) if n_objects is None else n_objects
        counts = np.zeros((len(frames), max(m, 1), N_CELLS), dtype=np.int32)
        for i, (frame, lm) in enumerate(zip(frames, label_maps)):
            if lm.labels.shape != frame.y.shape:
                raise InputError(f"label map {lm.index} does not match the frame size")
            if m:
                counts[i] = _frame_counts(frame, lm.labels, m)
        return cls(counts[:, :m] if m else counts[:, :0])

    @property
    def frame_count(self) -> int:
        return self.counts.shape[0]

    @property
    def object_count(self) -> int:
        return self.counts.shape[1]

    def histogram(self, t: int, m: int) -> np.ndarray:
        c = self.counts[t - 1, m - 1].astype(np.float64)
        n = self.totals[t - 1, m - 1]
        return c / n if n else c

    def exceeds(self, t_prev: int, frames: np.ndarray, tau: float) -> np.ndarray:
        """Boolean (len(frames), M): D_m(t_prev, t) >= tau, evaluated in exact integers."""
        p = _as_fraction(tau)
        prev = self.counts[t_prev - 1].astype(np.int64)        # (M, C)
        n_prev = self.totals[t_prev - 1]                         # (M,)
        cand = self.counts[frames - 1].astype(np.int64)          # (F, M, C)
        n_cand = self.totals[frames - 1]                         # (F, M)
        # D = sum(max(0, c/n - p/n_p)) = sum(max(0, c*n_p - p*n)) / (n * n_p)
        num = np.maximum(0, cand * n_prev[None, :, None] - prev[None] * n_cand[:, :, None]).sum(axis=2)
        den = n_cand * n_prev[None, :]
        # Python ints: tau's denominator can push the products past int64.
        lhs = num.astype(object) * p.denominator
        rhs = den.astype(object) * p.numerator
        return (lhs >= rhs).astype(bool) & (den > 0)


def _as_fraction(tau: float) -> Fraction:
    # Decimal reading of tau, so that 0.4 means exactly 2/5.
    return Fraction(repr(float(tau)))


def search_window(t_prev: int, direction: int, params: SelectionParams, frame_count: int):
    """Inclusive candidate window, clipped to [1, T]; ``None`` when empty."""
    if direction == FORWARD:
        lo, hi = t_prev + params.w_min, min(t_prev + params.w_max, frame_count)
    else:
        lo, hi = max(t_prev - params.w_max, 1), t_prev - params.w_min
    if lo > hi:
        return None
    return lo, hi


def gather_candidates(table: HistogramTable, t_prev: int, direction: int,
                      params: SelectionParams) -> list[int]:
    """Frames in the search window where some object's distance reaches tau.

    A frame appears once per qualifying object unless ``params.candidate_dedup``.
    """
    window = search_window(t_prev, direction, params, table.frame_count)
    if window is None or table.object_count == 0:
        return []
    frames = np.arange(window[0], window[1] + 1)
    hits = table.exceeds(t_prev, frames, params.tau)
    votes = hits.any(axis=1).astype(int) if params.candidate_dedup else hits.sum(axis=1)
    return [int(t) for t, n in zip(frames, votes) for _ in range(int(n))]


def _kernel_exponents(t, candidates) -> Counter:
    return Counter((t - c) ** 2 for c in candidates)


def _compare_scores(a: Counter, b: Counter, two_h2: Fraction) -> int:
    """Sign of sum_k a[k] x^k - sum_k b[k] x^k with x = exp(-1 / two_h2).

    x is transcendental, so the difference vanishes only for identical
    exponent multisets; otherwise precision is raised until the sign is certain.
    """
    diff = {k: a.get(k, 0) - b.get(k, 0) for k in set(a) | set(b)}
    diff = {k: d for k, d in diff.items() if d}
    if not diff:
        return 0
    weight = sum(abs(d) for d in diff.values())
    prec = 50
    while True:
        with decimal.localcontext() as ctx:
            ctx.prec = prec
            denom = Decimal(two_h2.numerator) / Decimal(two_h2.denominator)
            total = sum(d * (-Decimal(k) / denom).exp() for k, d in diff.items())
            if abs(total) > weight * Decimal(10) ** (5 - prec):
                return 1 if total > 0 else -1
        prec *= 2


def kde_peak(candidates, window, bandwidth: float = 5.0) -> int:
    """Integer frame in ``window`` maximising the Gaussian KDE of ``candidates``.

    Scores are compared exactly (near-ties are re-checked at high precision) and
    exact ties go to the smallest frame index.
    """
    if not candidates:
        raise InputError("kde_peak needs at least one candidate")
    lo, hi = window
    ts = range(lo, hi + 1)
    scores = [math.fsum(math.exp(-0.5 * ((t - c) / bandwidth) ** 2) for c in candidates) for t in ts]
    top = max(scores)
    near = [t for t, s in zip(ts, scores) if s >= top * (1 - 1e-9)]
    if len(near) == 1:
        return near[0]
    two_h2 = 2 * Fraction(bandwidth) ** 2
    best, best_key = near[0], _kernel_exponents(near[0], candidates)
    for t in near[1:]:
        key = _kernel_exponents(t, candidates)
        if _compare_scores(key, best_key, two_h2) > 0:
            best, best_key = t, key
    return best


def kde_density(candidates, ts, bandwidth: float = 5.0) -> np.ndarray:
    """Normalised KDE f(t) evaluated at ``ts``."""
    c = np.asarray(candidates, dtype=np.float64)
    z = (np.asarray(ts, dtype=np.float64)[:, None] - c[None, :]) / bandwidth
    return np.exp(-0.5 * z ** 2).sum(axis=1) / (bandwidth * len(c) * math.sqrt(2 * math.pi))


def _next_keyframe(table, t_prev, direction, params):
    window = search_window(t_prev, direction, params, table.frame_count)
    cands = gather_candidates(table, t_prev, direction, params)
    if cands:
        return kde_peak(cands, window, params.kde_bandwidth)
    step = t_prev + direction * params.w_max
    return min(max(step, 1), table.frame_count)


def _forward_pass(table, params):
    half = (table.frame_count + 1) // 2
    keys = [1]
    while keys[-1] + params.w_min <= half:
        nxt = _next_keyframe(table, keys[-1], FORWARD, params)
        if nxt > half:
            break
        keys.append(nxt)
    return keys


def _backward_pass(table, params):
    T = table.frame_count
    bound = (T + 1) // 2 + 1
    keys = [T]
    while keys[-1] - params.w_min >= bound:
        nxt = _next_keyframe(table, keys[-1], BACKWARD, params)
        if nxt < bound:
            break
        keys.append(nxt)
    return keys


def merge_passes(forward, backward, params: SelectionParams) -> list[int]:
    """Join the two passes at the centre of the sequence.

    A central gap shorter than w_min drops one interior central keyframe when the
    widened gap stays within w_max + bandwidth (closest to w_max wins, forward
    first on ties); a gap longer than w_max is filled at w_max spacing.
    """
    f, b = forward[-1], backward[-1]
    gap = b - f
    fwd, bwd = list(forward), list(backward)
    if gap < params.w_min:
        limit = params.w_max + params.kde_bandwidth
        options = []
        if len(fwd) > 1:
            options.append((abs(b - fwd[-2] - params.w_max), 0, b - fwd[-2]))
        if len(bwd) > 1:
            options.append((abs(bwd[-2] - f - params.w_max), 1, bwd[-2] - f))
        options = [o for o in options if o[2] <= limit]
        if options:
            _, which, _ = min(options)
            (fwd if which == 0 else bwd).pop()
    elif gap > params.w_max:
        fwd.extend(range(f + params.w_max, b, params.w_max))
    return sorted(set(fwd) | set(bwd))


def select_from_table(table: HistogramTable, params: SelectionParams) -> KeyframePlan:
    T = table.frame_count
    if T < 2:
        raise InputError("keyframe selection needs at least 2 frames")
    keys = merge_passes(_forward_pass(table, params), _backward_pass(table, params), params)
    return KeyframePlan(tuple(keys), T)


def select_keyframes(frames, label_maps, params: SelectionParams | None = None) -> KeyframePlan:
    params = params or SelectionParams()
    if len(frames) < 2:
        raise InputError("keyframe selection needs at least 2 frames")
    return select_from_table(HistogramTable.build(frames, label_maps), params)


def uniform_plan(frame_count: int, params: SelectionParams | None = None) -> KeyframePlan:
    """Plan produced when no candidate ever qualifies (pure W_max fallback)."""
    params = params or SelectionParams()
    empty = HistogramTable(np.zeros((frame_count, 0, N_CELLS), dtype=np.int32))
    return select_from_table(empty, params)
