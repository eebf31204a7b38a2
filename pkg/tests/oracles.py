"""Slow, independent reference implementations used as test oracles.

Nothing here imports the selection or metric code under test. Histograms are
built pixel by pixel with Counters, distances are exact Fractions, KDE scores
are compared symbolically, and MS-SSIM is computed with scalar loops.
"""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction

import mpmath

from cgvc.frame_io import yuv_to_rgb


# -- keyframe selection ------------------------------------------------------

def object_histograms(frame, labels):
    """{object id: Counter of (r//16, g//16, b//16) cells} for one frame."""
    rgb = yuv_to_rgb(frame)
    r, g, b = rgb.r.tolist(), rgb.g.tolist(), rgb.b.tolist()
    out = {}
    for y, row in enumerate(labels.tolist()):
        for x, m in enumerate(row):
            if m == 0:
                continue
            out.setdefault(m, Counter())[(r[y][x] // 16, g[y][x] // 16, b[y][x] // 16)] += 1
    return out


def distance(prev: Counter | None, cand: Counter | None) -> Fraction:
    if not prev or not cand:
        return Fraction(0)
    n_p, n_c = sum(prev.values()), sum(cand.values())
    total = Fraction(0)
    for cell, c in cand.items():
        gain = Fraction(c, n_c) - Fraction(prev.get(cell, 0), n_p)
        if gain > 0:
            total += gain
    return total


def _sign_of_difference(a: Counter, b: Counter, two_h2: Fraction) -> int:
    diff = {k: a[k] - b[k] for k in set(a) | set(b) if a[k] != b[k]}
    if not diff:
        return 0
    dps = 40
    while True:
        with mpmath.workdps(dps):
            denom = mpmath.mpf(two_h2.numerator) / two_h2.denominator
            total = mpmath.fsum(d * mpmath.exp(-mpmath.mpf(k) / denom) for k, d in diff.items())
            if abs(total) > mpmath.mpf(10) ** (10 - dps) * sum(abs(d) for d in diff.values()):
                return 1 if total > 0 else -1
        dps *= 2


def kde_argmax(candidates, lo, hi, bandwidth=5):
    """Exact argmax of sum_c exp(-(t-c)^2 / (2 h^2)) over integers in [lo, hi].

    Each score is a sum of powers of the transcendental exp(-1 / (2 h^2)), so two
    scores are equal exactly when their multisets of squared offsets agree.
    Otherwise the working precision grows until the sign of the gap is certain.
    """
    two_h2 = 2 * Fraction(bandwidth) ** 2
    best_t, best_key = lo, Counter((lo - c) ** 2 for c in candidates)
    for t in range(lo + 1, hi + 1):
        key = Counter((t - c) ** 2 for c in candidates)
        if _sign_of_difference(key, best_key, two_h2) > 0:
            best_t, best_key = t, key
    return best_t


def select(frames, label_maps, w_min=32, w_max=85, tau=0.4, bandwidth=5, dedup=False):
    """Brute-force keyframe selection following the documented rules step by step."""
    T = len(frames)
    hists = [object_histograms(f, lm.labels) for f, lm in zip(frames, label_maps)]
    objects = sorted({m for h in hists for m in h})
    threshold = Fraction(repr(float(tau)))

    def next_key(t_prev, sign):
        if sign > 0:
            lo, hi = t_prev + w_min, min(t_prev + w_max, T)
        else:
            lo, hi = max(t_prev - w_max, 1), t_prev - w_min
        cands = []
        for t in range(lo, hi + 1):
            votes = sum(1 for m in objects
                        if distance(hists[t_prev - 1].get(m), hists[t - 1].get(m)) >= threshold)
            cands += [t] * (min(votes, 1) if dedup else votes)
        if cands:
            return kde_argmax(cands, lo, hi, bandwidth)
        return min(max(t_prev + sign * w_max, 1), T)

    half = math.ceil(T / 2)
    fwd = [1]
    while fwd[-1] + w_min <= half:
        k = next_key(fwd[-1], +1)
        if k > half:
            break
        fwd.append(k)
    bwd = [T]
    while bwd[-1] - w_min >= half + 1:
        k = next_key(bwd[-1], -1)
        if k < half + 1:
            break
        bwd.append(k)

    f, b = fwd[-1], bwd[-1]
    if b - f < w_min:
        choices = []
        if len(fwd) >= 2 and b - fwd[-2] <= w_max + bandwidth:
            choices.append((abs(b - fwd[-2] - w_max), "f"))
        if len(bwd) >= 2 and bwd[-2] - f <= w_max + bandwidth:
            choices.append((abs(bwd[-2] - f - w_max), "b"))
        if choices:
            choices.sort()
            if choices[0][1] == "f":
                fwd = fwd[:-1]
            else:
                bwd = bwd[:-1]
    elif b - f > w_max:
        t = f + w_max
        while t < b:
            fwd.append(t)
            t += w_max
    return sorted(set(fwd + bwd))


# -- metrics -----------------------------------------------------------------

_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def _window():
    g = [math.exp(-((i - 5) ** 2) / (2 * 1.5 ** 2)) for i in range(11)]
    s = sum(g)
    return [v / s for v in g]


def _blur(img, w):
    """Valid-mode separable filtering with explicit loops."""
    n = len(w)
    rows = [[sum(w[k] * r[j + k] for k in range(n)) for j in range(len(r) - n + 1)] for r in img]
    return [[sum(w[k] * rows[i + k][j] for k in range(n)) for j in range(len(rows[0]))]
            for i in range(len(rows) - n + 1)]


def _ssim_scalar(x, y):
    """Mean SSIM and contrast-structure terms over valid windows."""
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    w = _window()
    mul = lambda a, b: [[p * q for p, q in zip(ra, rb)] for ra, rb in zip(a, b)]
    mx, my = _blur(x, w), _blur(y, w)
    exx, eyy, exy = _blur(mul(x, x), w), _blur(mul(y, y), w), _blur(mul(x, y), w)
    ssim_sum = cs_sum = 0.0
    n = 0
    for i in range(len(mx)):
        for j in range(len(mx[0])):
            a, b = mx[i][j], my[i][j]
            vx, vy, cov = exx[i][j] - a * a, eyy[i][j] - b * b, exy[i][j] - a * b
            cs = (2 * cov + c2) / (vx + vy + c2)
            ssim_sum += cs * (2 * a * b + c1) / (a * a + b * b + c1)
            cs_sum += cs
            n += 1
    return ssim_sum / n, cs_sum / n


def _half(img):
    return [[(img[2 * i][2 * j] + img[2 * i][2 * j + 1] + img[2 * i + 1][2 * j] + img[2 * i + 1][2 * j + 1]) / 4.0
             for j in range(len(img[0]) // 2)] for i in range(len(img) // 2)]


def ms_ssim_reference(rgb_a, rgb_b):
    """Scalar MS-SSIM of two HxWx3 uint8 arrays on 0.299R + 0.587G + 0.114B."""
    def gray(arr):
        return [[0.299 * float(p[0]) + 0.587 * float(p[1]) + 0.114 * float(p[2]) for p in row] for row in arr.tolist()]

    x, y = gray(rgb_a), gray(rgb_b)
    score = 1.0
    for level, weight in enumerate(_WEIGHTS):
        ssim, cs = _ssim_scalar(x, y)
        term = ssim if level == 4 else cs
        score *= max(term, 0.0) ** weight
        x, y = _half(x), _half(y)
    return score
