"""``cgvc`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

from . import __version__
from .codec import DEFAULT_DECODE_CMD, DEFAULT_ENCODE_CMD, CodecSpec
from .config import load_config, pick
from .container import read_container, total_rate, write_container
from .control_prior import PriorKind
from .errors import CgvcError, InputError
from .frame_io import VideoMeta, parse_fps, read_video, write_video
from .generation import BaselineGenerator, ExternalGenerator
from .keyframes import KeyframePlan, SelectionParams, select_keyframes
from .metrics import bd_metric, bd_rate, ms_ssim, psnr_rgb, read_curves_csv, MS_SSIM_MIN_SIZE
from .frame_io import yuv_to_rgb
from .pipeline import EncodeConfig, decode, encode, plan_rate_allocation
from .plots import emit_rd_outputs, plot_sweep_grid
from .segmentation import parse_segmentation
from .sweep import run_sweep, write_sweep_csv
from .synth import KINDS, SyntheticSpec, write_synth

log = logging.getLogger("cgvc")


def _int_list(text):
    return [int(x) for x in text.split(",") if x]


def _float_list(text):
    return [float(x) for x in text.split(",") if x]


def _int_tuple(text):
    return tuple(int(x) for x in text.split(","))


# -- shared argument groups --------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="key-value config file; flags override it")
    p.add_argument("--scratch-dir", help="directory for temporary files")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker threads (default: cores)")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_input(p):
    p.add_argument("--input", required=True, help="Y4M file, or raw YUV420P8 with --width/--height")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--fps", default="25")
    p.add_argument("--masks", help="directory of frame_%%06d.pgm label maps")
    p.add_argument("--segmentation", help="masks | whole | grid:RxC (default: masks if --masks else whole)")


def _add_selection(p):
    p.add_argument("--w-min", type=int)
    p.add_argument("--w-max", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--bandwidth", type=float, help="KDE bandwidth in frames (default 5)")
    p.add_argument("--candidate-dedup", action="store_true", default=None,
                   help="count each candidate frame once regardless of how many objects vote for it")


def _add_codec(p):
    p.add_argument("--codec", help="internal:qN | external[:qpN] for both streams (default internal:q1)")
    p.add_argument("--kf-codec", help="override --codec for keyframes")
    p.add_argument("--prior-codec", help="override --codec for priors")


def _load_input(args):
    meta = None
    if args.width or args.height:
        if not (args.width and args.height):
            raise InputError("raw input needs both --width and --height")
        num, den = parse_fps(args.fps)
        meta = VideoMeta(args.width, args.height, 1, num, den)
    meta, frames = read_video(args.input, meta)
    seg = args.segmentation or ("masks" if args.masks else "whole")
    masks = parse_segmentation(seg, meta, args.masks)
    return meta, frames, masks


def _selection(args, cfg) -> SelectionParams:
    defaults = SelectionParams()
    return SelectionParams(
        w_min=pick(args.w_min, cfg, "selection", "w_min", defaults.w_min, int),
        w_max=pick(args.w_max, cfg, "selection", "w_max", defaults.w_max, int),
        tau=pick(args.tau, cfg, "selection", "tau", defaults.tau, float),
        kde_bandwidth=pick(args.bandwidth, cfg, "selection", "bandwidth", defaults.kde_bandwidth, float),
        candidate_dedup=pick(args.candidate_dedup, cfg, "selection", "candidate_dedup", False, bool),
    )


def _codec(text, cfg, scratch) -> CodecSpec:
    return CodecSpec.parse(
        text,
        encode_cmd=pick(None, cfg, "codec.external", "encode_cmd", DEFAULT_ENCODE_CMD),
        decode_cmd=pick(None, cfg, "codec.external", "decode_cmd", DEFAULT_DECODE_CMD),
        scratch_dir=scratch,
    )


def _codecs(args, cfg):
    base = pick(args.codec, cfg, "encode", "codec", "internal:q1")
    kf = pick(args.kf_codec, cfg, "encode", "kf_codec", base)
    prior = pick(args.prior_codec, cfg, "encode", "prior_codec", base)
    return _codec(kf, cfg, args.scratch_dir), _codec(prior, cfg, args.scratch_dir)


def _print(obj):
    def fix(v):
        if isinstance(v, float) and math.isinf(v):
            return "inf"
        if isinstance(v, dict):
            return {k: fix(x) for k, x in v.items()}
        return v
    print(json.dumps(fix(obj), indent=2))


# -- subcommands -------------------------------------------------------------

def cmd_synth(args):
    num, den = parse_fps(args.fps)
    spec = SyntheticSpec(kind=args.kind, meta=VideoMeta(args.width, args.height, args.frames, num, den),
                         seed=args.seed, flip_at=args.flip_at,
                         region=_int_tuple(args.region) if args.region else None,
                         velocity=_int_tuple(args.velocity), noise=args.noise)
    video, masks = write_synth(spec, args.out)
    _print({"video": video, "masks": masks})


def cmd_select(args):
    cfg = load_config(args.config)
    meta, frames, masks = _load_input(args)
    plan = select_keyframes(frames, masks, _selection(args, cfg))
    doc = plan.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh)
            fh.write("\n")
    _print(doc)


def _encode_config(args, cfg) -> EncodeConfig:
    kf_codec, prior_codec = _codecs(args, cfg)
    return EncodeConfig(
        selection=_selection(args, cfg),
        prior=PriorKind.parse(pick(args.prior, cfg, "encode", "prior", "luma")),
        kf_codec=kf_codec,
        prior_codec=prior_codec,
        target_rate=pick(args.target_rate, cfg, "encode", "target_rate", None, float),
        luma_fraction=pick(args.luma_fraction, cfg, "encode", "luma_fraction", 0.9, float),
        edge_threshold=pick(args.edge_threshold, cfg, "encode", "edge_threshold", 128, int),
    )


def cmd_encode(args):
    cfg = load_config(args.config)
    meta, frames, masks = _load_input(args)
    config = _encode_config(args, cfg)
    plan = None
    if args.plan:
        with open(args.plan) as fh:
            plan = KeyframePlan.from_json(json.load(fh), len(frames))
    report = {}
    if config.target_rate is not None:
        alloc = plan_rate_allocation(meta, frames, masks, config, plan=plan)
        report["allocation"] = dict(kf_quality=alloc.kf_quality, prior_quality=alloc.prior_quality,
                                    kf_kbps=alloc.kf_kbps, prior_kbps=alloc.prior_kbps)
    container = encode(meta, frames, masks, config, plan=plan)
    write_container(container, args.out)
    report.update(keyframes=list(container.plan.keyframes), rate_kbps=total_rate(container))
    _print(report)


def cmd_decode(args):
    cfg = load_config(args.config)
    container = read_container(args.input)
    m = container.meta
    kind = pick(args.generator, cfg, "generator", "kind", "baseline")
    if kind == "external":
        command = pick(args.generator_cmd, cfg, "generator", "command")
        if not command:
            raise InputError("--generator external needs --generator-cmd or [generator] command")
        generator = ExternalGenerator(command, args.scratch_dir, (m.fps_num, m.fps_den))
    elif kind == "baseline":
        generator = BaselineGenerator()
    else:
        raise InputError(f"unknown generator {kind!r}")
    external = _codec("external", cfg, args.scratch_dir)
    out = decode(container, generator, external_codec=external, jobs=args.jobs)
    write_video(out.frames, args.out, meta=m)
    _print({"frames": len(out.frames), "output": args.out})


def cmd_metrics(args):
    num, den = parse_fps(args.fps)
    meta = VideoMeta(args.width, args.height, 1, num, den) if args.width and args.height else None
    _, ref = read_video(args.ref, meta)
    _, dist = read_video(args.dist, meta)
    if len(ref) != len(dist):
        raise InputError(f"reference has {len(ref)} frames, distorted has {len(dist)}")
    ref_rgb = [yuv_to_rgb(f) for f in ref]
    dist_rgb = [yuv_to_rgb(f) for f in dist]
    result = {"psnr": psnr_rgb(ref_rgb, dist_rgb), "ms_ssim": None}
    if min(ref[0].width, ref[0].height) >= MS_SSIM_MIN_SIZE:
        result["ms_ssim"] = ms_ssim(ref_rgb, dist_rgb)
    if args.json:
        _print(result)
    else:
        ms = "n/a (frame too small)" if result["ms_ssim"] is None else f"{result['ms_ssim']:.6f}"
        print(f"psnr_rgb\t{result['psnr']:.4f}\nms_ssim\t{ms}")


def cmd_bdrate(args):
    anchors = read_curves_csv(args.anchor, args.metric_column)
    tests = read_curves_csv(args.test, args.metric_column)
    anchor = anchors[0]
    rows = []
    for curve in tests:
        rows.append({"label": curve.label, "bd_rate": bd_rate(anchor, curve).to_json(),
                     "bd_metric": bd_metric(anchor, curve).to_json()})
    if args.json:
        print(json.dumps({"anchor": anchor.label, "results": rows}, indent=2))
    else:
        print("label\tbd_rate_%\tbd_metric")
        for curve in tests:
            print(f"{curve.label}\t{bd_rate(anchor, curve)}\t{bd_metric(anchor, curve)}")


def cmd_rd_plot(args):
    curves = []
    for path in args.csv:
        curves.extend(read_curves_csv(path, args.metric_column))
    paths = emit_rd_outputs(curves, args.out_dir, y_label=args.y_label or args.metric_column,
                            png=not args.no_png)
    _print({"written": paths})


def cmd_sweep(args):
    cfg = load_config(args.config)
    meta, frames, masks = _load_input(args)
    base = _encode_config(args, cfg)
    anchor = None
    if args.anchor:
        w, t = args.anchor.split(",")
        anchor = (int(w), float(t))
    rows = run_sweep(meta, frames, masks, _int_list(args.w_max_grid), _float_list(args.tau_grid),
                     _int_list(args.qualities), base, anchor, jobs=args.jobs)
    os.makedirs(args.out_dir, exist_ok=True)
    csv_path = os.path.join(args.out_dir, "sweep.csv")
    write_sweep_csv(rows, csv_path)
    written = [csv_path]
    if not args.no_png:
        png = os.path.join(args.out_dir, "sweep.png")
        plot_sweep_grid(rows, png)
        written.append(png)
    _print({"written": written, "cells": len(rows)})


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgvc", description="Controllable generative video compression toolkit")
    parser.add_argument("--version", action="version", version=f"cgvc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic video and its masks")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--frames", type=int, default=180)
    p.add_argument("--fps", default="25")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--flip-at", type=int, default=100)
    p.add_argument("--region", help="x0,y0,x1,y1 of the scripted object")
    p.add_argument("--velocity", default="2,0", help="dx,dy per frame for movingblock")
    p.add_argument("--noise", type=int, default=0, help="uniform RGB noise amplitude")
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("select-keyframes", help="run colour-distance-guided keyframe selection")
    _add_input(p)
    _add_selection(p)
    p.add_argument("--out", help="plan JSON path")
    _add_common(p)
    p.set_defaults(func=cmd_select)

    def encode_flags(p):
        _add_input(p)
        _add_selection(p)
        _add_codec(p)
        p.add_argument("--prior", choices=("luma", "edge"))
        p.add_argument("--edge-threshold", type=int)
        p.add_argument("--target-rate", type=float, help="total kbps; picks internal quality steps")
        p.add_argument("--luma-fraction", type=float, help="share of the rate given to priors (default 0.9)")

    p = sub.add_parser("encode", help="encode a video into a .cgvc container")
    encode_flags(p)
    p.add_argument("--plan", help="use this plan JSON instead of running selection")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a .cgvc container")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="output .y4m (or raw .yuv)")
    p.add_argument("--generator", choices=("baseline", "external"))
    p.add_argument("--generator-cmd", help="template with {workdir} and {frames}")
    _add_common(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("metrics", help="RGB PSNR and MS-SSIM between two videos")
    p.add_argument("--ref", required=True)
    p.add_argument("--dist", required=True)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--fps", default="25")
    p.add_argument("--json", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bdrate", help="Bjontegaard deltas between RD curve CSVs")
    p.add_argument("--anchor", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--metric-column", default="metric")
    p.add_argument("--json", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_bdrate)

    p = sub.add_parser("rd-plot", help="write curves.csv / curves.svg / curves.png")
    p.add_argument("--csv", required=True, action="append")
    p.add_argument("--metric-column", default="metric")
    p.add_argument("--y-label")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-png", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_rd_plot)

    p = sub.add_parser("sweep", help="W_max x tau ablation grid")
    encode_flags(p)
    p.add_argument("--w-max-grid", default="45,65,85,105")
    p.add_argument("--tau-grid", default="0.2,0.4,0.6,1.0")
    p.add_argument("--qualities", default="1,4,8,16", help="internal quality steps forming each RD curve")
    p.add_argument("--anchor", help="w_max,tau of the anchor cell (default: first cell)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-png", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.scratch_dir:
        os.makedirs(args.scratch_dir, exist_ok=True)
    try:
        args.func(args)
    except CgvcError as exc:
        print(f"cgvc: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"cgvc: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
