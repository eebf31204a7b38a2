"""Frame-level colour correction: align each reconstructed frame's per-channel
mean and standard deviation with the original's transmitted statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .frame_io import RgbFrame, round_half_away

Q_ONE = 1 << 16
SIGMA_FLOOR = 2.0 ** -16


def to_fixed(x) -> np.ndarray:
    """Q16.16, rounded half away from zero."""
    return round_half_away(np.asarray(x, dtype=np.float64) * Q_ONE).astype(np.int64)


def from_fixed(q) -> np.ndarray:
    return np.asarray(q, dtype=np.float64) / Q_ONE


@dataclass(frozen=True, eq=False)
class ColorParams:
    """Q16.16 per-frame, per-channel (R, G, B) mean and population std; arrays are (T, 3)."""

    mu_q: np.ndarray
    sigma_q: np.ndarray

    def __post_init__(self):
        if self.mu_q.shape != self.sigma_q.shape or self.mu_q.ndim != 2 or self.mu_q.shape[1] != 3:
            raise InputError("colour params must be two (T, 3) arrays")
        if np.any(self.sigma_q < 0):
            raise InputError("sigma must be non-negative")

    @property
    def frame_count(self) -> int:
        return self.mu_q.shape[0]

    def mu(self, t: int) -> np.ndarray:
        return from_fixed(self.mu_q[t - 1])

    def sigma(self, t: int) -> np.ndarray:
        return from_fixed(self.sigma_q[t - 1])

    def for_frame(self, t: int):
        if not 1 <= t <= self.frame_count:
            raise InputError(f"no colour parameters for frame {t}")
        return self.mu(t), self.sigma(t)

    def __eq__(self, other):
        if not isinstance(other, ColorParams):
            return NotImplemented
        return np.array_equal(self.mu_q, other.mu_q) and np.array_equal(self.sigma_q, other.sigma_q)

    __hash__ = None


def channel_stats(rgb: RgbFrame):
    x = rgb.stack().reshape(-1, 3).astype(np.float64)
    return x.mean(axis=0), x.std(axis=0)


def compute_color_params(original_rgb) -> ColorParams:
    stats = [channel_stats(f) for f in original_rgb]
    mu = np.array([s[0] for s in stats]).reshape(-1, 3)
    sigma = np.array([s[1] for s in stats]).reshape(-1, 3)
    return ColorParams(to_fixed(mu), to_fixed(sigma))


def color_correct(recon: RgbFrame, params) -> RgbFrame:
    """Affinely map each channel of ``recon`` onto the target (mu, sigma).

    ``params`` is a ``(mu, sigma)`` pair of length-3 arrays, or a
    :class:`ColorParams` from which frame ``recon.index`` is taken. A flat
    channel (sigma below 2**-16) becomes the constant target mean.
    """
    if isinstance(params, ColorParams):
        mu_o, sigma_o = params.for_frame(recon.index)
    else:
        if params is None:
            raise InputError(f"missing colour parameters for frame {recon.index}")
        mu_o, sigma_o = (np.asarray(p, dtype=np.float64) for p in params)
    x = recon.stack().astype(np.float64)
    mu_r = x.reshape(-1, 3).mean(axis=0)
    sigma_r = x.reshape(-1, 3).std(axis=0)
    out = np.empty_like(x)
    for c in range(3):
        if sigma_r[c] < SIGMA_FLOOR:
            out[..., c] = mu_o[c]
        else:
            out[..., c] = (x[..., c] - mu_r[c]) * (sigma_o[c] / sigma_r[c]) + mu_o[c]
    out = np.clip(round_half_away(np.clip(out, 0.0, 255.0)), 0, 255).astype(np.uint8)
    return RgbFrame.from_array(recon.index, out)
