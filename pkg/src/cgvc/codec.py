"""Traditional-codec backends for the keyframe and prior streams.

``internal`` is a small deterministic codec (quantise, predict from the left
neighbour, run-length code, deflate) so everything runs without external
binaries. ``external`` shells out to a VVenC-style encoder/decoder pair.
"""

from __future__ import annotations

import os
import shlex
import struct
import subprocess
import tempfile
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import CodecMismatch, CorruptStream, ExternalCommandFailed, InputError, TemplateError
from .frame_io import Frame, check_consistent, raw_bytes, read_raw_bytes, VideoMeta

INTERNAL_ID = 0
EXTERNAL_ID = 1

DEFAULT_ENCODE_CMD = ("vvencapp -i {input} -s {width}x{height} -fr {fps} -f {frames} "
                      "--preset slower -g 32 -ip 9999 -qp {qp} -b {output}")
DEFAULT_DECODE_CMD = "vvdecapp -b {input} -o {output} -d 8"

_INTERNAL_MAGIC = b"CGIC"
_INTERNAL_HEADER = struct.Struct("<4sIIIB")
_LITERAL, _RUN = 0, 1
_MIN_RUN = 4


@dataclass(frozen=True)
class CodecSpec:
    backend: str = "internal"
    quality: int = 1
    qp: int = 32
    encode_cmd: str = DEFAULT_ENCODE_CMD
    decode_cmd: str = DEFAULT_DECODE_CMD
    scratch_dir: str | None = None

    def __post_init__(self):
        if self.backend not in ("internal", "external"):
            raise InputError(f"unknown codec backend {self.backend!r}")
        if self.backend == "internal" and not 1 <= self.quality <= 64:
            raise InputError(f"internal quality step must be in 1..64, got {self.quality}")

    @property
    def codec_id(self) -> int:
        return INTERNAL_ID if self.backend == "internal" else EXTERNAL_ID

    def with_quality(self, quality: int) -> "CodecSpec":
        return CodecSpec(self.backend, quality, self.qp, self.encode_cmd, self.decode_cmd, self.scratch_dir)

    @classmethod
    def parse(cls, text: str, **kwargs) -> "CodecSpec":
        """``internal:q8`` / ``internal`` / ``external``."""
        name, _, arg = text.partition(":")
        if name == "internal":
            q = int(arg.lstrip("qQ")) if arg else kwargs.pop("quality", 1)
            return cls("internal", quality=q, **kwargs)
        if name == "external":
            if arg:
                kwargs["qp"] = int(arg.lstrip("qpQP"))
            return cls("external", **kwargs)
        raise InputError(f"unknown codec {text!r}")


@dataclass(frozen=True)
class EncodedStream:
    data: bytes
    codec_id: int
    frame_count: int

    @property
    def size_bits(self) -> int:
        return 8 * len(self.data)

    @classmethod
    def empty(cls, codec_id: int = INTERNAL_ID) -> "EncodedStream":
        return cls(b"", codec_id, 0)


def measure_rate(stream, fps: float, frame_count: int) -> float:
    """Kilobits per second of a stream (or a bit count) spread over ``frame_count`` frames."""
    if frame_count < 1 or fps <= 0:
        raise InputError("measure_rate needs frame_count >= 1 and fps > 0")
    bits = stream.size_bits if isinstance(stream, EncodedStream) else int(stream)
    return bits * fps / frame_count / 1000.0


# -- run-length coding -------------------------------------------------------

def _varint(n: int) -> bytes:
    out = bytearray()
    while True:
        byte = n & 0x7F
        n >>= 7
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _read_varint(buf: bytes, pos: int):
    shift = value = 0
    while True:
        if pos >= len(buf):
            raise CorruptStream("truncated varint")
        byte = buf[pos]
        pos += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, pos
        shift += 7
        if shift > 63:
            raise CorruptStream("varint too long")


def rle_encode(data) -> bytes:
    """Byte-wise RLE: ``0 len bytes...`` literal blocks and ``1 len value`` runs."""
    a = np.frombuffer(bytes(data), dtype=np.uint8)
    n = len(a)
    if n == 0:
        return b""
    starts = np.concatenate(([0], np.flatnonzero(a[1:] != a[:-1]) + 1))
    lengths = np.diff(np.concatenate((starts, [n])))
    out = []
    pos = 0
    for i in np.flatnonzero(lengths >= _MIN_RUN):
        s, length = int(starts[i]), int(lengths[i])
        if s > pos:
            out += [bytes([_LITERAL]), _varint(s - pos), a[pos:s].tobytes()]
        out += [bytes([_RUN]), _varint(length), bytes([a[s]])]
        pos = s + length
    if pos < n:
        out += [bytes([_LITERAL]), _varint(n - pos), a[pos:].tobytes()]
    return b"".join(out)


def rle_decode(buf: bytes) -> bytes:
    out = []
    pos = 0
    while pos < len(buf):
        tag = buf[pos]
        length, pos = _read_varint(buf, pos + 1)
        if tag == _LITERAL:
            if pos + length > len(buf):
                raise CorruptStream("truncated literal block")
            out.append(buf[pos:pos + length])
            pos += length
        elif tag == _RUN:
            if pos >= len(buf):
                raise CorruptStream("truncated run")
            out.append(bytes([buf[pos]]) * length)
            pos += 1
        else:
            raise CorruptStream(f"bad RLE tag {tag}")
    return b"".join(out)


# -- internal codec ----------------------------------------------------------

def quantize(plane: np.ndarray, q: int) -> np.ndarray:
    return (plane.astype(np.int64) + q // 2) // q


def dequantize(idx: np.ndarray, q: int) -> np.ndarray:
    return np.minimum(idx * q, 255).astype(np.uint8)


def _predict_residual(idx: np.ndarray) -> np.ndarray:
    # Left neighbour; column 0 predicts from the sample above; (0, 0) from zero.
    res = idx.copy()
    res[:, 1:] -= idx[:, :-1]
    res[1:, 0] -= idx[:-1, 0]
    return (res & 0xFF).astype(np.uint8)


def _undo_prediction(res: np.ndarray) -> np.ndarray:
    r = res.astype(np.int64)
    r[:, 0] = np.cumsum(r[:, 0])
    return np.cumsum(r, axis=1) & 0xFF


def _plane_shapes(width, height):
    return [(height, width), (height // 2, width // 2), (height // 2, width // 2)]


def _internal_encode(frames, q: int) -> bytes:
    w, h = check_consistent(frames)
    residuals = [_predict_residual(quantize(p, q)).tobytes() for f in frames for p in f.planes()]
    payload = zlib.compress(rle_encode(b"".join(residuals)), 9)
    return _INTERNAL_HEADER.pack(_INTERNAL_MAGIC, w, h, len(frames), q) + payload


def _internal_decode(data: bytes, expected_frames: int | None = None):
    if len(data) < _INTERNAL_HEADER.size:
        raise CorruptStream("internal stream shorter than its header")
    magic, w, h, count, q = _INTERNAL_HEADER.unpack_from(data)
    if magic != _INTERNAL_MAGIC or not 1 <= q <= 64 or w % 2 or h % 2 or not w or not h:
        raise CorruptStream("bad internal stream header")
    if expected_frames is not None and count != expected_frames:
        raise CorruptStream(f"stream header says {count} frames, expected {expected_frames}")
    try:
        body = rle_decode(zlib.decompress(data[_INTERNAL_HEADER.size:]))
    except zlib.error as exc:
        raise CorruptStream(f"payload does not inflate: {exc}") from None
    shapes = _plane_shapes(w, h)
    frame_size = sum(a * b for a, b in shapes)
    if len(body) != frame_size * count:
        raise CorruptStream(f"decoded {len(body)} bytes, expected {frame_size * count}")
    arr = np.frombuffer(body, dtype=np.uint8)
    frames = []
    pos = 0
    for t in range(1, count + 1):
        planes = []
        for shape in shapes:
            n = shape[0] * shape[1]
            planes.append(dequantize(_undo_prediction(arr[pos:pos + n].reshape(shape)), q))
            pos += n
        frames.append(Frame(t, *planes))
    return frames


# -- external codec ----------------------------------------------------------

def _check_template(template: str, required) -> None:
    missing = [name for name in required if "{" + name + "}" not in template]
    if missing:
        raise TemplateError(f"command template lacks placeholder(s) {missing}: {template}")


def _fps_text(fps: float) -> str:
    return f"{fps:g}"


def run_template(template: str, values: dict, error=ExternalCommandFailed) -> subprocess.CompletedProcess:
    args = [tok.format_map(values) for tok in shlex.split(template)]
    try:
        proc = subprocess.run(args, capture_output=True)
    except FileNotFoundError as exc:
        raise error(" ".join(args), 127, str(exc)) from None
    if proc.returncode:
        raise error(" ".join(args), proc.returncode, proc.stderr.decode(errors="replace"))
    return proc


def _external_encode(frames, spec: CodecSpec, fps: float) -> bytes:
    _check_template(spec.encode_cmd, ("input", "output"))
    w, h = check_consistent(frames)
    with tempfile.TemporaryDirectory(prefix="cgvc-enc-", dir=spec.scratch_dir) as tmp:
        src = os.path.join(tmp, "input.yuv")
        dst = os.path.join(tmp, "stream.bin")
        with open(src, "wb") as fh:
            fh.write(raw_bytes(frames))
        run_template(spec.encode_cmd, dict(input=src, output=dst, width=w, height=h, fps=_fps_text(fps),
                                           qp=spec.qp, frames=len(frames)))
        if not os.path.exists(dst):
            raise ExternalCommandFailed(spec.encode_cmd, 0, "encoder produced no bitstream")
        with open(dst, "rb") as fh:
            return fh.read()


def _external_decode(stream: EncodedStream, spec: CodecSpec, size, fps: float):
    _check_template(spec.decode_cmd, ("input", "output"))
    if size is None:
        raise InputError("external decoding needs the frame size")
    w, h = size
    with tempfile.TemporaryDirectory(prefix="cgvc-dec-", dir=spec.scratch_dir) as tmp:
        src = os.path.join(tmp, "stream.bin")
        dst = os.path.join(tmp, "output.yuv")
        with open(src, "wb") as fh:
            fh.write(stream.data)
        run_template(spec.decode_cmd, dict(input=src, output=dst, width=w, height=h, fps=_fps_text(fps),
                                           qp=spec.qp, frames=stream.frame_count))
        if not os.path.exists(dst):
            raise CorruptStream("external decoder wrote no output")
        with open(dst, "rb") as fh:
            data = fh.read()
    try:
        _, frames = read_raw_bytes(data, VideoMeta(w, h, 1))
    except InputError as exc:
        raise CorruptStream(f"external decoder output: {exc}") from None
    if len(frames) != stream.frame_count:
        raise CorruptStream(f"external decoder returned {len(frames)} frames, expected {stream.frame_count}")
    return frames


# -- public API --------------------------------------------------------------

def encode_stream(frames, spec: CodecSpec, fps: float = 25.0) -> EncodedStream:
    frames = list(frames)
    if not frames:
        raise InputError("cannot encode an empty frame sequence")
    if spec.backend == "internal":
        data = _internal_encode(frames, spec.quality)
    else:
        data = _external_encode(frames, spec, fps)
    return EncodedStream(data, spec.codec_id, len(frames))


def decode_stream(stream: EncodedStream, spec: CodecSpec, size=None, fps: float = 25.0) -> list[Frame]:
    """Decode to ``stream.frame_count`` frames; ``size`` = (width, height) is needed for external streams."""
    if stream.codec_id != spec.codec_id:
        raise CodecMismatch(f"stream codec id {stream.codec_id} does not match backend {spec.backend}")
    if stream.frame_count == 0:
        return []
    if spec.backend == "internal":
        return _internal_decode(stream.data, stream.frame_count)
    return _external_decode(stream, spec, size, fps)
