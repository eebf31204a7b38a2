"""Controllable generative video compression: keyframe selection, condition
coding, first/last-frame generation hooks, colour correction and RD evaluation."""

__version__ = "0.1.0"

from .frame_io import Frame, RgbFrame, VideoMeta, read_video, write_video, yuv_to_rgb, rgb_to_yuv
from .keyframes import KeyframePlan, SelectionParams, select_keyframes
from .pipeline import EncodeConfig, decode, encode, plan_rate_allocation
from .container import CgvcContainer, parse, serialize

__all__ = [
    "Frame", "RgbFrame", "VideoMeta", "read_video", "write_video", "yuv_to_rgb", "rgb_to_yuv",
    "KeyframePlan", "SelectionParams", "select_keyframes",
    "EncodeConfig", "encode", "decode", "plan_rate_allocation",
    "CgvcContainer", "parse", "serialize",
]
