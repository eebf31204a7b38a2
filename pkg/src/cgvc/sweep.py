"""Ablation grid over W_max and tau, scored by BD-rate against an anchor cell."""

from __future__ import annotations

import csv
import dataclasses

from .codec import CodecSpec
from .container import total_rate
from .errors import InputError
from .keyframes import select_keyframes
from .metrics import RdCurve, bd_metric, bd_rate, chroma_mse, video_psnr
from .pipeline import EncodeConfig, decode, encode

SWEEP_FIELDS = ("w_max", "tau", "keyframes", "rate_kbps", "psnr", "chroma_mse",
                "bd_rate_psnr", "bd_psnr")


def evaluate_cell(meta, frames, masks, config: EncodeConfig, qualities, jobs=1, generator=None):
    """Encode/decode at each quality step; returns (plan, points) with points as dicts."""
    plan = select_keyframes(frames, masks, config.selection)
    points = []
    for q in qualities:
        cfg = dataclasses.replace(config, kf_codec=config.kf_codec.with_quality(q),
                                  prior_codec=config.prior_codec.with_quality(q), target_rate=None)
        container = encode(meta, frames, masks, cfg, plan=plan)
        out = decode(container, generator=generator, jobs=jobs)
        points.append(dict(quality=q, rate_kbps=total_rate(container)["total"],
                           psnr=video_psnr(frames, out.frames), chroma_mse=chroma_mse(frames, out.frames)))
    return plan, points


def _curve(label, points):
    seen = {}
    for p in points:
        seen.setdefault(p["rate_kbps"], p["psnr"])
    return RdCurve(label, tuple(seen.items()), "psnr")


def run_sweep(meta, frames, masks, w_max_values, tau_values, qualities, base: EncodeConfig | None = None,
              anchor=None, jobs=1, generator=None) -> list[dict]:
    """One row per (w_max, tau) cell; ``anchor`` defaults to the first cell."""
    base = base or EncodeConfig(kf_codec=CodecSpec(), prior_codec=CodecSpec())
    if base.kf_codec.backend != "internal" or base.prior_codec.backend != "internal":
        raise InputError("sweeps use the internal codec's quality steps")
    if len(qualities) < 2:
        raise InputError("a sweep needs at least two quality steps to form RD curves")
    cells = [(w, t) for w in w_max_values for t in tau_values]
    anchor = tuple(anchor) if anchor is not None else cells[0]
    if anchor not in cells:
        raise InputError(f"anchor {anchor} is not a grid cell")
    results = {}
    for w_max, tau in cells:
        sel = dataclasses.replace(base.selection, w_max=w_max, tau=tau,
                                  w_min=min(base.selection.w_min, w_max))
        results[(w_max, tau)] = evaluate_cell(meta, frames, masks, dataclasses.replace(base, selection=sel),
                                              qualities, jobs, generator)
    anchor_curve = _curve("anchor", results[anchor][1])
    rows = []
    for (w_max, tau), (plan, points) in results.items():
        curve = _curve(f"w{w_max}_t{tau:g}", points)
        br, bm = bd_rate(anchor_curve, curve), bd_metric(anchor_curve, curve)
        ref = points[0]
        rows.append(dict(w_max=w_max, tau=tau, keyframes=len(plan.keyframes), rate_kbps=ref["rate_kbps"],
                         psnr=ref["psnr"], chroma_mse=ref["chroma_mse"],
                         bd_rate_psnr=br.value, bd_psnr=bm.value, points=points))
    return rows


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_FIELDS)
        for r in rows:
            writer.writerow(["N/A" if r[k] is None else r[k] for k in SWEEP_FIELDS])
