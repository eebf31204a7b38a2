"""Fidelity metrics and Bjontegaard deltas."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DegenerateCurve, InputError
from .frame_io import RgbFrame, yuv_to_rgb

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
MS_SSIM_MIN_SIZE = 176
_WIN = 11
_SIGMA = 1.5
_C1 = (0.01 * 255) ** 2
_C2 = (0.03 * 255) ** 2


def _as_array(x) -> np.ndarray:
    if isinstance(x, RgbFrame):
        return x.stack().astype(np.float64)
    return np.asarray(x, dtype=np.float64)


def _as_sequence(x):
    if isinstance(x, (list, tuple)):
        return [_as_array(f) for f in x]
    return [_as_array(x)]


def mse(a, b) -> float:
    """Mean squared error pooled over every sample of every frame."""
    fa, fb = _as_sequence(a), _as_sequence(b)
    if len(fa) != len(fb):
        raise InputError(f"{len(fa)} frames vs {len(fb)} frames")
    total = count = 0.0
    for x, y in zip(fa, fb):
        if x.shape != y.shape:
            raise InputError(f"shape mismatch {x.shape} vs {y.shape}")
        total += float(((x - y) ** 2).sum())
        count += x.size
    return total / count


def psnr_rgb(a, b) -> float:
    """PSNR over all RGB samples; for sequences the MSE is averaged before the log.

    Identical inputs give ``math.inf``.
    """
    err = mse(a, b)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / err)


def video_psnr(ref_frames, dist_frames) -> float:
    """RGB PSNR of two YUV frame sequences (BT.709 conversion first)."""
    return psnr_rgb([yuv_to_rgb(f) for f in ref_frames], [yuv_to_rgb(f) for f in dist_frames])


def chroma_mse(ref_frames, dist_frames) -> float:
    """MSE pooled over the U and V planes of two YUV sequences."""
    ref = [p.astype(np.float64) for f in ref_frames for p in (f.u, f.v)]
    dist = [p.astype(np.float64) for f in dist_frames for p in (f.u, f.v)]
    return mse(ref, dist)


def _gray(x) -> np.ndarray:
    arr = _as_array(x)
    if arr.ndim == 3:
        return arr @ np.array([0.299, 0.587, 0.114])
    return arr


def gaussian_window(size: int = _WIN, sigma: float = _SIGMA) -> np.ndarray:
    k = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(k ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    n = len(win)
    rows = np.lib.stride_tricks.sliding_window_view(img, n, axis=0) @ win
    return np.lib.stride_tricks.sliding_window_view(rows, n, axis=1) @ win


def _ssim_terms(x: np.ndarray, y: np.ndarray, win: np.ndarray):
    mu_x, mu_y = _filter_valid(x, win), _filter_valid(y, win)
    sxx = _filter_valid(x * x, win) - mu_x ** 2
    syy = _filter_valid(y * y, win) - mu_y ** 2
    sxy = _filter_valid(x * y, win) - mu_x * mu_y
    cs = (2 * sxy + _C2) / (sxx + syy + _C2)
    lum = (2 * mu_x * mu_y + _C1) / (mu_x ** 2 + mu_y ** 2 + _C1)
    return float(np.mean(lum * cs)), float(np.mean(cs))


def _downsample(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    return img[:h, :w].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def ms_ssim(a, b) -> float:
    """Five-scale MS-SSIM on the luma-equivalent channel, in [0, 1].

    Negative per-scale terms are clamped to zero before weighting.
    """
    fa, fb = _as_sequence(a), _as_sequence(b)
    if len(fa) != len(fb):
        raise InputError(f"{len(fa)} frames vs {len(fb)} frames")
    return float(np.mean([_ms_ssim_frame(x, y) for x, y in zip(fa, fb)]))


def _ms_ssim_frame(a, b) -> float:
    x, y = _gray(a), _gray(b)
    if x.shape != y.shape:
        raise InputError(f"shape mismatch {x.shape} vs {y.shape}")
    if min(x.shape) < MS_SSIM_MIN_SIZE:
        raise InputError(f"MS-SSIM needs at least {MS_SSIM_MIN_SIZE}x{MS_SSIM_MIN_SIZE}, got {x.shape}")
    win = gaussian_window()
    score = 1.0
    for level, weight in enumerate(MS_SSIM_WEIGHTS):
        ssim, cs = _ssim_terms(x, y, win)
        term = ssim if level == len(MS_SSIM_WEIGHTS) - 1 else cs
        score *= max(term, 0.0) ** weight
        x, y = _downsample(x), _downsample(y)
    return score


# -- RD curves and Bjontegaard deltas ---------------------------------------

@dataclass(frozen=True)
class RdPoint:
    rate: float
    metric: float

    def __post_init__(self):
        if not self.rate > 0 or not math.isfinite(self.rate):
            raise InputError(f"rate must be positive, got {self.rate}")
        if not math.isfinite(self.metric):
            raise InputError(f"metric must be finite, got {self.metric}")


@dataclass(frozen=True)
class RdCurve:
    label: str
    points: tuple
    metric_kind: str = "metric"
    higher_is_better: bool = True

    def __post_init__(self):
        pts = tuple(sorted((p if isinstance(p, RdPoint) else RdPoint(*p) for p in self.points),
                           key=lambda p: p.rate))
        if len(pts) < 2:
            raise InputError(f"curve {self.label!r} needs at least 2 points")
        if any(b.rate <= a.rate for a, b in zip(pts, pts[1:])):
            raise InputError(f"curve {self.label!r} has repeated rates")
        object.__setattr__(self, "points", pts)

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])

    @property
    def metrics(self) -> np.ndarray:
        return np.array([p.metric for p in self.points])


@dataclass(frozen=True)
class BdResult:
    """``value`` is None when the curves do not overlap (reported as N/A)."""

    value: float | None
    degraded: bool = False

    @property
    def applicable(self) -> bool:
        return self.value is not None

    def __str__(self):
        if self.value is None:
            return "N/A"
        return f"{self.value:.4f}" + (" (low-order fit)" if self.degraded else "")

    def to_json(self):
        return {"value": self.value, "applicable": self.applicable, "degraded": self.degraded}


NOT_APPLICABLE = BdResult(None)


def _interpolant(x: np.ndarray, y: np.ndarray, label: str) -> PchipInterpolator:
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    if np.any(np.diff(x) <= 0):
        raise DegenerateCurve(f"curve {label!r} repeats an abscissa value and cannot be inverted")
    return PchipInterpolator(x, y, extrapolate=False)


def _mean_gap(xa, ya, xt, yt, anchor_label, test_label):
    ia = _interpolant(xa, ya, anchor_label)
    it = _interpolant(xt, yt, test_label)
    lo, hi = max(xa.min(), xt.min()), min(xa.max(), xt.max())
    if not hi > lo:
        return None
    return (it.integrate(lo, hi) - ia.integrate(lo, hi)) / (hi - lo)


def bd_rate(anchor: RdCurve, test: RdCurve) -> BdResult:
    """Average rate difference (%) of ``test`` vs ``anchor`` over their common metric range."""
    degraded = min(len(anchor.points), len(test.points)) < 4
    gap = _mean_gap(anchor.metrics, np.log10(anchor.rates), test.metrics, np.log10(test.rates),
                    anchor.label, test.label)
    if gap is None:
        return NOT_APPLICABLE
    return BdResult(float((10.0 ** gap - 1.0) * 100.0), degraded)


def bd_metric(anchor: RdCurve, test: RdCurve) -> BdResult:
    """Average metric difference of ``test`` vs ``anchor`` over their common log-rate range."""
    degraded = min(len(anchor.points), len(test.points)) < 4
    gap = _mean_gap(np.log10(anchor.rates), anchor.metrics, np.log10(test.rates), test.metrics,
                    anchor.label, test.label)
    if gap is None:
        return NOT_APPLICABLE
    return BdResult(float(gap), degraded)


CSV_FIELDS = ("label", "rate_kbps", "metric")


def write_curves_csv(curves, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for curve in curves:
            for p in curve.points:
                writer.writerow([curve.label, repr(p.rate), repr(p.metric)])


def read_curves_csv(path, metric_column: str = "metric", higher_is_better: bool = True) -> list[RdCurve]:
    """Curves grouped by label, in order of first appearance.

    ``metric_column`` selects any extra column (e.g. externally computed DISTS).
    """
    grouped: dict[str, list] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"label", "rate_kbps", metric_column} - set(reader.fieldnames or ())
        if missing:
            raise InputError(f"{path}: missing column(s) {sorted(missing)}")
        for row in reader:
            grouped.setdefault(row["label"], []).append(
                RdPoint(float(row["rate_kbps"]), float(row[metric_column])))
    kind = "metric" if metric_column == "metric" else metric_column
    return [RdCurve(label, tuple(pts), kind, higher_is_better) for label, pts in grouped.items()]
