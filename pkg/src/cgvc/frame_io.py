"""Raw video I/O (Y4M and planar YUV420P8) and BT.709 colour conversion."""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidDimensions, MissingMeta, TruncatedInput

Y4M_MAGIC = b"YUV4MPEG2"
FRAME_TAG = b"FRAME"
_CHROMA_420 = {"C420", "C420jpeg", "C420paldv", "C420mpeg2"}

# BT.709 luma coefficients.
KR = 0.2126
KB = 0.0722
KG = 1.0 - KR - KB


@dataclass(frozen=True)
class VideoMeta:
    width: int
    height: int
    frame_count: int
    fps_num: int = 25
    fps_den: int = 1
    pixel_format: str = "YUV420P8"
    # Y4M header tokens after W/H/F (chroma tag included), kept for byte-exact rewrites.
    y4m_extra: tuple = ("C420jpeg",)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.width % 2 or self.height % 2:
            raise InvalidDimensions(f"dimensions must be positive and even, got {self.width}x{self.height}")
        if self.frame_count < 1:
            raise InvalidDimensions("frame_count must be >= 1")
        if self.fps_num <= 0 or self.fps_den <= 0:
            raise InvalidDimensions("fps must be positive")
        if self.pixel_format != "YUV420P8":
            raise InvalidDimensions(f"unsupported pixel format {self.pixel_format}")

    @property
    def fps(self) -> float:
        return self.fps_num / self.fps_den

    @property
    def frame_size(self) -> int:
        return self.width * self.height * 3 // 2

    def with_frames(self, frame_count: int) -> "VideoMeta":
        return VideoMeta(self.width, self.height, frame_count, self.fps_num, self.fps_den,
                         self.pixel_format, self.y4m_extra)


def parse_fps(text) -> tuple[int, int]:
    """Accept ``25``, ``30000/1001``, ``29.97`` or ``30000:1001``."""
    frac = Fraction(str(text).replace(":", "/")).limit_denominator(1_000_000)
    if frac <= 0:
        raise InvalidDimensions(f"fps must be positive, got {text}")
    return frac.numerator, frac.denominator


@dataclass(frozen=True, eq=False)
class Frame:
    """One 8-bit 4:2:0 picture; ``index`` is 1-based."""

    index: int
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @property
    def width(self) -> int:
        return self.y.shape[1]

    @property
    def height(self) -> int:
        return self.y.shape[0]

    def planes(self):
        return self.y, self.u, self.v

    def replace(self, **kwargs) -> "Frame":
        values = dict(index=self.index, y=self.y, u=self.u, v=self.v)
        values.update(kwargs)
        return Frame(**values)

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return self.index == other.index and all(
            np.array_equal(a, b) for a, b in zip(self.planes(), other.planes()))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class RgbFrame:
    index: int
    r: np.ndarray
    g: np.ndarray
    b: np.ndarray

    def stack(self) -> np.ndarray:
        """Channels-last uint8 array of shape (H, W, 3)."""
        return np.stack([self.r, self.g, self.b], axis=-1)

    @classmethod
    def from_array(cls, index: int, rgb: np.ndarray) -> "RgbFrame":
        rgb = np.asarray(rgb)
        return cls(index, rgb[..., 0], rgb[..., 1], rgb[..., 2])

    def __eq__(self, other):
        if not isinstance(other, RgbFrame):
            return NotImplemented
        return self.index == other.index and np.array_equal(self.stack(), other.stack())

    __hash__ = None


def make_frame(index: int, y, u, v) -> Frame:
    y = np.ascontiguousarray(y, dtype=np.uint8)
    u = np.ascontiguousarray(u, dtype=np.uint8)
    v = np.ascontiguousarray(v, dtype=np.uint8)
    h, w = y.shape
    if h % 2 or w % 2:
        raise InvalidDimensions(f"odd luma dimensions {w}x{h}")
    if u.shape != (h // 2, w // 2) or v.shape != (h // 2, w // 2):
        raise InvalidDimensions("chroma planes must be half the luma size")
    return Frame(index, y, u, v)


def check_consistent(frames) -> tuple[int, int]:
    if not frames:
        raise InvalidDimensions("empty frame sequence")
    w, h = frames[0].width, frames[0].height
    for f in frames:
        if (f.width, f.height) != (w, h) or f.u.shape != (h // 2, w // 2) or f.v.shape != (h // 2, w // 2):
            raise InvalidDimensions(f"frame {f.index} has inconsistent dimensions")
    return w, h


def _frame_from_bytes(index, buf, width, height) -> Frame:
    n_y = width * height
    n_c = n_y // 4
    data = np.frombuffer(buf, dtype=np.uint8)
    y = data[:n_y].reshape(height, width)
    u = data[n_y:n_y + n_c].reshape(height // 2, width // 2)
    v = data[n_y + n_c:n_y + 2 * n_c].reshape(height // 2, width // 2)
    return Frame(index, y, u, v)


def _frame_bytes(frame: Frame) -> bytes:
    return frame.y.tobytes() + frame.u.tobytes() + frame.v.tobytes()


def _parse_y4m_header(line: bytes):
    tokens = line.decode("ascii").split()
    if not tokens or tokens[0] != "YUV4MPEG2":
        raise TruncatedInput("not a YUV4MPEG2 stream")
    width = height = None
    fps = (25, 1)
    extra = []
    for tok in tokens[1:]:
        key, val = tok[0], tok[1:]
        if key == "W":
            width = int(val)
        elif key == "H":
            height = int(val)
        elif key == "F":
            num, den = val.split(":")
            fps = (int(num), int(den))
        elif key == "C":
            if tok not in _CHROMA_420:
                raise InvalidDimensions(f"unsupported chroma format {tok}")
            extra.append(tok)
        else:
            extra.append(tok)
    if width is None or height is None:
        raise TruncatedInput("Y4M header lacks W or H")
    return width, height, fps, tuple(extra)


def read_y4m_bytes(data: bytes):
    nl = data.find(b"\n")
    if nl < 0:
        raise TruncatedInput("Y4M header not terminated")
    width, height, (fps_num, fps_den), extra = _parse_y4m_header(data[:nl])
    if width % 2 or height % 2 or width <= 0 or height <= 0:
        raise InvalidDimensions(f"odd or empty dimensions {width}x{height}")
    size = width * height * 3 // 2
    frames = []
    pos = nl + 1
    while pos < len(data):
        end = data.find(b"\n", pos)
        if end < 0 or not data.startswith(FRAME_TAG, pos):
            raise TruncatedInput(f"bad FRAME marker at byte {pos}")
        pos = end + 1
        if pos + size > len(data):
            raise TruncatedInput(f"frame {len(frames) + 1} truncated")
        frames.append(_frame_from_bytes(len(frames) + 1, data[pos:pos + size], width, height))
        pos += size
    if not frames:
        raise TruncatedInput("Y4M stream holds no frames")
    meta = VideoMeta(width, height, len(frames), fps_num, fps_den, y4m_extra=extra)
    return meta, frames


def read_raw_bytes(data: bytes, meta: VideoMeta | None):
    if meta is None:
        raise MissingMeta("raw YUV input needs explicit width/height/fps")
    size = meta.frame_size
    if len(data) == 0 or len(data) % size:
        raise TruncatedInput(f"{len(data)} bytes is not a multiple of the {size}-byte frame size")
    count = len(data) // size
    frames = [_frame_from_bytes(i + 1, data[i * size:(i + 1) * size], meta.width, meta.height)
              for i in range(count)]
    return meta.with_frames(count), frames


def is_y4m(path) -> bool:
    return str(path).lower().endswith(".y4m")


def read_video(path, meta: VideoMeta | None = None):
    """Return ``(meta, frames)`` for a Y4M file or a raw YUV420P8 file plus ``meta``.

    For raw input the frame count in ``meta`` is ignored and derived from the file size.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if data.startswith(Y4M_MAGIC):
        return read_y4m_bytes(data)
    return read_raw_bytes(data, meta)


def y4m_bytes(frames, fps=(25, 1), extra=("C420jpeg",)) -> bytes:
    w, h = check_consistent(frames)
    tokens = ["YUV4MPEG2", f"W{w}", f"H{h}", f"F{fps[0]}:{fps[1]}"]
    tokens += list(extra)
    parts = [" ".join(tokens).encode("ascii") + b"\n"]
    for f in frames:
        parts.append(FRAME_TAG + b"\n")
        parts.append(_frame_bytes(f))
    return b"".join(parts)


def raw_bytes(frames) -> bytes:
    check_consistent(frames)
    return b"".join(_frame_bytes(f) for f in frames)


def write_video(frames, path, format: str | None = None, meta: VideoMeta | None = None) -> None:
    """Write ``frames`` as ``y4m`` or ``raw``; the format defaults from the extension."""
    frames = list(frames)
    fmt = format or ("y4m" if is_y4m(path) else "raw")
    if fmt == "y4m":
        fps = (meta.fps_num, meta.fps_den) if meta else (25, 1)
        extra = meta.y4m_extra if meta else ("C420jpeg",)
        payload = y4m_bytes(frames, fps, extra)
    elif fmt == "raw":
        payload = raw_bytes(frames)
    else:
        raise ValueError(f"unknown video format {fmt!r}")
    tmp = f"{path}.part"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _to_u8(x) -> np.ndarray:
    return np.clip(round_half_away(x), 0, 255).astype(np.uint8)


def _upsample(plane: np.ndarray) -> np.ndarray:
    return plane.repeat(2, axis=0).repeat(2, axis=1)


def yuv_to_rgb(frame: Frame) -> RgbFrame:
    """Limited-range BT.709 to 8-bit RGB with nearest-neighbour chroma upsampling.

    Out-of-gamut results are clamped to [0, 255].
    """
    y = (frame.y.astype(np.float64) - 16.0) / 219.0
    cb = (_upsample(frame.u).astype(np.float64) - 128.0) / 224.0
    cr = (_upsample(frame.v).astype(np.float64) - 128.0) / 224.0
    r = y + 2.0 * (1.0 - KR) * cr
    b = y + 2.0 * (1.0 - KB) * cb
    g = (y - KR * r - KB * b) / KG
    return RgbFrame(frame.index, _to_u8(r * 255.0), _to_u8(g * 255.0), _to_u8(b * 255.0))


def rgb_to_yuv(rgb: RgbFrame) -> Frame:
    """Inverse of :func:`yuv_to_rgb`; chroma is 2x2 box-averaged before rounding."""
    r = rgb.r.astype(np.float64) / 255.0
    g = rgb.g.astype(np.float64) / 255.0
    b = rgb.b.astype(np.float64) / 255.0
    y = KR * r + KG * g + KB * b
    cb = (b - y) / (2.0 * (1.0 - KB))
    cr = (r - y) / (2.0 * (1.0 - KR))
    h, w = y.shape
    if h % 2 or w % 2:
        raise InvalidDimensions(f"odd dimensions {w}x{h}")

    def box(p):
        return p.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))

    return Frame(rgb.index, _to_u8(16.0 + 219.0 * y), _to_u8(128.0 + 224.0 * box(cb)),
                 _to_u8(128.0 + 224.0 * box(cr)))


def gray_frame(index: int, width: int, height: int, luma: int = 16) -> Frame:
    return make_frame(index, np.full((height, width), luma), np.full((height // 2, width // 2), 128),
                      np.full((height // 2, width // 2), 128))
