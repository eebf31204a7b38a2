"""Non-keyframe reconstruction from first/last keyframes plus per-frame priors."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .codec import run_template
from .control_prior import PriorKind, prior_to_frame
from .errors import GeneratorFailed, GeneratorOutputMismatch, InputError, TemplateError
from .frame_io import Frame, read_video, write_video, VideoMeta


@dataclass(frozen=True)
class ClipGenRequest:
    first_kf: Frame
    last_kf: Frame
    priors: tuple
    clip_span: tuple

    def __post_init__(self):
        k_f, k_l = self.clip_span
        if k_l <= k_f:
            raise InputError(f"bad clip span {self.clip_span}")
        if len(self.priors) != k_l - k_f - 1:
            raise InputError(f"clip {self.clip_span} needs {k_l - k_f - 1} priors, got {len(self.priors)}")
        if [p.index for p in self.priors] != list(range(k_f + 1, k_l)):
            raise InputError("priors must cover the clip interior in temporal order")


def _blend(first: np.ndarray, last: np.ndarray, t: int, k_f: int, k_l: int) -> np.ndarray:
    # round-half-up of ((k_l - t) * first + (t - k_f) * last) / (k_l - k_f), in integers
    den = k_l - k_f
    num = (k_l - t) * first.astype(np.int64) + (t - k_f) * last.astype(np.int64)
    return ((2 * num + den) // (2 * den)).astype(np.uint8)


def baseline_generate(request: ClipGenRequest) -> list[Frame]:
    """Luma from the decoded prior, chroma linearly blended between the keyframes."""
    k_f, k_l = request.clip_span
    out = []
    for prior in request.priors:
        if prior.kind != PriorKind.LUMA:
            raise InputError("the baseline generator only accepts luma priors")
        t = prior.index
        out.append(Frame(t, prior.plane,
                         _blend(request.first_kf.u, request.last_kf.u, t, k_f, k_l),
                         _blend(request.first_kf.v, request.last_kf.v, t, k_f, k_l)))
    return out


def external_generate(request: ClipGenRequest, generator_cmd: str, scratch_dir=None,
                      fps=(25, 1)) -> list[Frame]:
    """Run an external first/last-frame generator.

    The command sees ``{workdir}`` holding first.y4m, last.y4m and priors.y4m and
    must write ``out.y4m`` with one frame per prior; ``{frames}`` is that count.
    """
    if "{workdir}" not in generator_cmd:
        raise TemplateError("generator command lacks the {workdir} placeholder")
    n = len(request.priors)
    w, h = request.first_kf.width, request.first_kf.height
    meta = VideoMeta(w, h, 1, fps[0], fps[1])
    with tempfile.TemporaryDirectory(prefix="cgvc-gen-", dir=scratch_dir) as workdir:
        write_video([request.first_kf], os.path.join(workdir, "first.y4m"), "y4m", meta)
        write_video([request.last_kf], os.path.join(workdir, "last.y4m"), "y4m", meta)
        if n:
            write_video([prior_to_frame(p) for p in request.priors], os.path.join(workdir, "priors.y4m"),
                        "y4m", meta)
        run_template(generator_cmd, dict(workdir=workdir, frames=n), error=GeneratorFailed)
        out_path = os.path.join(workdir, "out.y4m")
        if not os.path.exists(out_path):
            raise GeneratorOutputMismatch("generator wrote no out.y4m")
        try:
            out_meta, frames = read_video(out_path)
        except InputError as exc:
            raise GeneratorOutputMismatch(f"unreadable generator output: {exc}") from None
    if len(frames) != n:
        raise GeneratorOutputMismatch(f"generator returned {len(frames)} frames, expected {n}")
    if (out_meta.width, out_meta.height) != (w, h):
        raise GeneratorOutputMismatch(f"generator output is {out_meta.width}x{out_meta.height}, expected {w}x{h}")
    return [f.replace(index=p.index) for f, p in zip(frames, request.priors)]


class BaselineGenerator:
    name = "baseline"

    def __call__(self, request: ClipGenRequest) -> list[Frame]:
        return baseline_generate(request)


class ExternalGenerator:
    name = "external"

    def __init__(self, command: str, scratch_dir=None, fps=(25, 1)):
        self.command = command
        self.scratch_dir = scratch_dir
        self.fps = fps

    def __call__(self, request: ClipGenRequest) -> list[Frame]:
        return external_generate(request, self.command, self.scratch_dir, self.fps)
