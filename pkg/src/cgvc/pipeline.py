"""Encode (select -> extract -> compress -> pack) and decode
(unpack -> decompress -> generate -> fuse -> colour-correct)."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .codec import CodecSpec, EncodedStream, INTERNAL_ID, decode_stream, encode_stream, measure_rate
from .color_correction import color_correct, compute_color_params
from .container import CgvcContainer, total_rate
from .control_prior import PriorKind, extract_prior, frame_to_prior, prior_to_frame
from .errors import InputError, PlanStreamMismatch, UnreachableRate
from .frame_io import VideoMeta, rgb_to_yuv, yuv_to_rgb
from .generation import BaselineGenerator, ClipGenRequest
from .keyframes import KeyframePlan, SelectionParams, select_keyframes

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncodeConfig:
    selection: SelectionParams = field(default_factory=SelectionParams)
    prior: PriorKind = PriorKind.LUMA
    kf_codec: CodecSpec = field(default_factory=CodecSpec)
    prior_codec: CodecSpec = field(default_factory=CodecSpec)
    target_rate: float | None = None
    luma_fraction: float = 0.9
    edge_threshold: int = 128

    def __post_init__(self):
        if not 0 < self.luma_fraction < 1:
            raise InputError(f"luma_fraction must lie in (0, 1), got {self.luma_fraction}")
        if self.target_rate is not None and self.target_rate <= 0:
            raise InputError("target_rate must be positive")


@dataclass
class DecodeResult:
    frames: list          # final YUV output
    fused: list           # keyframes + generated frames before colour correction
    rgb: list             # colour-corrected RGB frames


@dataclass(frozen=True)
class RateAllocation:
    kf_quality: int
    prior_quality: int
    kf_kbps: float
    prior_kbps: float
    kf_target: float
    prior_target: float

    def __iter__(self):
        return iter((self.kf_quality, self.prior_quality))


def _conditions(frames, plan: KeyframePlan, kind: PriorKind, edge_threshold: int):
    key_frames = [frames[t - 1] for t in plan.keyframes]
    priors = [prior_to_frame(extract_prior(frames[t - 1], kind, edge_threshold)) for t in plan.non_keyframes]
    return key_frames, priors


def _encode_or_empty(frames, spec: CodecSpec, fps: float) -> EncodedStream:
    return encode_stream(frames, spec, fps) if frames else EncodedStream.empty(spec.codec_id)


def encode(meta: VideoMeta, frames, masks, config: EncodeConfig | None = None,
           plan: KeyframePlan | None = None) -> CgvcContainer:
    config = config or EncodeConfig()
    frames = list(frames)
    if len(masks) != len(frames):
        raise InputError(f"{len(masks)} label maps for {len(frames)} frames")
    meta = meta.with_frames(len(frames))
    if plan is None:
        plan = select_keyframes(frames, masks, config.selection)
    kf_codec, prior_codec = config.kf_codec, config.prior_codec
    if config.target_rate is not None:
        alloc = plan_rate_allocation(meta, frames, masks, config, plan=plan)
        kf_codec = kf_codec.with_quality(alloc.kf_quality)
        prior_codec = prior_codec.with_quality(alloc.prior_quality)
    key_frames, priors = _conditions(frames, plan, config.prior, config.edge_threshold)
    log.info("plan %s: %d keyframes, %d priors", plan.keyframes, len(key_frames), len(priors))
    return CgvcContainer(
        meta=meta,
        plan=plan,
        prior_kind=config.prior,
        codec_id=kf_codec.codec_id,
        b_k=encode_stream(key_frames, kf_codec, meta.fps),
        b_p=_encode_or_empty(priors, prior_codec, meta.fps),
        b_c=compute_color_params([yuv_to_rgb(f) for f in frames]),
    )


def _decoder_for(stream: EncodedStream, external: CodecSpec | None) -> CodecSpec:
    if stream.codec_id == INTERNAL_ID:
        return CodecSpec("internal")
    if external is None:
        raise InputError("stream was coded externally; supply an external codec spec")
    return external


def decode(container: CgvcContainer, generator=None, external_codec: CodecSpec | None = None,
           jobs: int = 1) -> DecodeResult:
    generator = generator or BaselineGenerator()
    meta, plan = container.meta, container.plan
    size = (meta.width, meta.height)
    if container.b_k.frame_count != len(plan.keyframes):
        raise PlanStreamMismatch(
            f"B_K holds {container.b_k.frame_count} frames but the plan has {len(plan.keyframes)} keyframes")
    non_keys = plan.non_keyframes
    if container.b_p.frame_count != len(non_keys):
        raise PlanStreamMismatch(
            f"B_P holds {container.b_p.frame_count} frames but the plan leaves {len(non_keys)} non-keyframes")
    keys = decode_stream(container.b_k, _decoder_for(container.b_k, external_codec), size, meta.fps)
    prior_frames = decode_stream(container.b_p, _decoder_for(container.b_p, external_codec), size, meta.fps)
    if len(keys) != len(plan.keyframes) or len(prior_frames) != len(non_keys):
        raise PlanStreamMismatch("decoded frame counts disagree with the plan")

    fused = [None] * meta.frame_count
    for t, f in zip(plan.keyframes, keys):
        fused[t - 1] = f.replace(index=t)
    priors = {t: frame_to_prior(f.replace(index=t), container.prior_kind) for t, f in zip(non_keys, prior_frames)}

    requests = [ClipGenRequest(fused[a - 1], fused[b - 1], tuple(priors[t] for t in range(a + 1, b)), (a, b))
                for a, b in plan.clips if b - a > 1]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        for generated in pool.map(generator, requests):
            for f in generated:
                fused[f.index - 1] = f

    rgb = [color_correct(yuv_to_rgb(f), container.b_c) for f in fused]
    return DecodeResult(frames=[rgb_to_yuv(c) for c in rgb], fused=fused, rgb=rgb)


def _search_quality(frames, spec: CodecSpec, target: float, fps: float, frame_count: int):
    """Quality step whose rate is closest to ``target`` (rate falls as the step grows)."""
    cache = {}

    def rate(q):
        if q not in cache:
            cache[q] = measure_rate(encode_stream(frames, spec.with_quality(q), fps), fps, frame_count)
        return cache[q]

    if rate(1) <= target:
        return 1, rate(1)
    if rate(64) > target:
        raise UnreachableRate(f"stream cannot reach {target:.3f} kbps", rate(64), rate(1))
    lo, hi = 1, 64  # rate(lo) > target >= rate(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if rate(mid) > target:
            lo = mid
        else:
            hi = mid
    best = min((lo, hi), key=lambda q: (abs(rate(q) - target), q))
    return best, rate(best)


def plan_rate_allocation(meta: VideoMeta, frames, masks, config: EncodeConfig,
                         plan: KeyframePlan | None = None) -> RateAllocation:
    """Pick internal quality steps so B_P gets ``luma_fraction`` of the target rate and B_K the rest."""
    if config.target_rate is None:
        raise InputError("rate allocation needs a target rate")
    if config.kf_codec.backend != "internal" or config.prior_codec.backend != "internal":
        raise InputError("rate allocation requires the internal codec")
    frames = list(frames)
    plan = plan or select_keyframes(frames, masks, config.selection)
    key_frames, priors = _conditions(frames, plan, config.prior, config.edge_threshold)
    prior_target = config.luma_fraction * config.target_rate
    kf_target = config.target_rate - prior_target
    T = len(frames)
    kf_q, kf_rate = _search_quality(key_frames, config.kf_codec, kf_target, meta.fps, T)
    if priors:
        prior_q, prior_rate = _search_quality(priors, config.prior_codec, prior_target, meta.fps, T)
    else:
        prior_q, prior_rate = 1, 0.0
    return RateAllocation(kf_q, prior_q, kf_rate, prior_rate, kf_target, prior_target)


def container_rate(container: CgvcContainer) -> float:
    return total_rate(container)["total"]
