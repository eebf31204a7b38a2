"""The .cgvc file: header, keyframe plan and the B_K / B_P / B_C sections.

Byte layout (little-endian) is documented in docs/format.md.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .codec import EncodedStream, measure_rate
from .color_correction import ColorParams
from .control_prior import PriorKind
from .errors import (BadMagic, CrcMismatch, InputError, PlanOutOfRange, TruncatedSection,
                     UnsupportedVersion)
from .frame_io import VideoMeta
from .keyframes import KeyframePlan

MAGIC = b"CGVC"
VERSION = 1

HEADER = struct.Struct("<4sHIIIIIBBH")
TABLE_ENTRY = struct.Struct("<4sII")
HEADER_CRC = struct.Struct("<I")
STREAM_PREFIX = struct.Struct("<BI")

SECTIONS = (("PLAN", b"PLAN"), ("B_K", b"B_K_"), ("B_P", b"B_P_"), ("B_C", b"B_C_"))


@dataclass(frozen=True)
class CgvcContainer:
    meta: VideoMeta
    plan: KeyframePlan
    prior_kind: PriorKind
    codec_id: int
    b_k: EncodedStream
    b_p: EncodedStream
    b_c: ColorParams
    version: int = VERSION

    @property
    def frame_count(self) -> int:
        return self.meta.frame_count


def _plan_bytes(plan: KeyframePlan) -> bytes:
    return struct.pack(f"<I{len(plan.keyframes)}I", len(plan.keyframes), *plan.keyframes)


def _stream_bytes(stream: EncodedStream) -> bytes:
    return STREAM_PREFIX.pack(stream.codec_id, stream.frame_count) + stream.data


def _color_bytes(params: ColorParams) -> bytes:
    body = np.stack([params.mu_q, params.sigma_q], axis=-1).astype("<i4")  # (T, 3, 2)
    return struct.pack("<I", params.frame_count) + body.tobytes()


def _section_payloads(c: CgvcContainer) -> list[bytes]:
    return [_plan_bytes(c.plan), _stream_bytes(c.b_k), _stream_bytes(c.b_p), _color_bytes(c.b_c)]


def serialize(c: CgvcContainer) -> bytes:
    payloads = _section_payloads(c)
    m = c.meta
    head = HEADER.pack(MAGIC, c.version, m.width, m.height, m.frame_count, m.fps_num, m.fps_den,
                       int(c.prior_kind), c.codec_id, len(payloads))
    table = b"".join(TABLE_ENTRY.pack(tag, len(p), zlib.crc32(p)) for (_, tag), p in zip(SECTIONS, payloads))
    return head + table + HEADER_CRC.pack(zlib.crc32(head + table)) + b"".join(payloads)


def _parse_stream(payload: bytes, name: str) -> EncodedStream:
    if len(payload) < STREAM_PREFIX.size:
        raise TruncatedSection(f"section {name} too short")
    codec_id, count = STREAM_PREFIX.unpack_from(payload)
    return EncodedStream(bytes(payload[STREAM_PREFIX.size:]), codec_id, count)


def _parse_plan(payload: bytes, frame_count: int) -> KeyframePlan:
    if len(payload) < 4:
        raise TruncatedSection("section PLAN too short")
    (n,) = struct.unpack_from("<I", payload)
    if len(payload) != 4 + 4 * n:
        raise TruncatedSection("section PLAN length disagrees with its count")
    keys = struct.unpack_from(f"<{n}I", payload, 4)
    if any(not 1 <= k <= frame_count for k in keys):
        raise PlanOutOfRange(f"plan index outside [1, {frame_count}]")
    try:
        return KeyframePlan(tuple(keys), frame_count)
    except InputError as exc:
        raise PlanOutOfRange(str(exc)) from None


def _parse_color(payload: bytes, frame_count: int) -> ColorParams:
    if len(payload) < 4:
        raise TruncatedSection("section B_C too short")
    (n,) = struct.unpack_from("<I", payload)
    if len(payload) != 4 + 24 * n:
        raise TruncatedSection("section B_C length disagrees with its count")
    if n != frame_count:
        raise InputError(f"B_C holds {n} entries for {frame_count} frames")
    body = np.frombuffer(payload, dtype="<i4", offset=4).reshape(n, 3, 2).astype(np.int64)
    return ColorParams(body[..., 0].copy(), body[..., 1].copy())


def parse(data: bytes) -> CgvcContainer:
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic("not a CGVC container")
    if len(data) < HEADER.size:
        raise TruncatedSection("header truncated")
    (_, version, width, height, frame_count, fps_num, fps_den, prior_kind, codec_id,
     n_sections) = HEADER.unpack_from(data)
    if version == 0 or version > VERSION:
        raise UnsupportedVersion(f"container version {version}, supported up to {VERSION}")
    if n_sections != len(SECTIONS):
        raise TruncatedSection(f"expected {len(SECTIONS)} sections, header says {n_sections}")
    table_end = HEADER.size + n_sections * TABLE_ENTRY.size
    if len(data) < table_end + HEADER_CRC.size:
        raise TruncatedSection("section table truncated")
    (head_crc,) = HEADER_CRC.unpack_from(data, table_end)
    if zlib.crc32(data[:table_end]) != head_crc:
        raise CrcMismatch("header")
    pos = table_end + HEADER_CRC.size
    payloads = {}
    for i, (name, tag) in enumerate(SECTIONS):
        got_tag, length, crc = TABLE_ENTRY.unpack_from(data, HEADER.size + i * TABLE_ENTRY.size)
        if got_tag != tag:
            raise TruncatedSection(f"section {i} has tag {got_tag!r}, expected {tag!r}")
        if pos + length > len(data):
            raise TruncatedSection(f"section {name} truncated")
        payload = data[pos:pos + length]
        if zlib.crc32(payload) != crc:
            raise CrcMismatch(name)
        payloads[name] = payload
        pos += length
    if pos != len(data):
        raise TruncatedSection(f"{len(data) - pos} trailing bytes after the last section")
    try:
        meta = VideoMeta(width, height, frame_count, fps_num, fps_den)
        kind = PriorKind(prior_kind)
    except (InputError, ValueError) as exc:
        raise InputError(f"invalid container header: {exc}") from None
    return CgvcContainer(
        meta=meta,
        plan=_parse_plan(payloads["PLAN"], frame_count),
        prior_kind=kind,
        codec_id=codec_id,
        b_k=_parse_stream(payloads["B_K"], "B_K"),
        b_p=_parse_stream(payloads["B_P"], "B_P"),
        b_c=_parse_color(payloads["B_C"], frame_count),
        version=version,
    )


def section_sizes(c: CgvcContainer) -> dict:
    """Bytes per component; framing of every section counts as overhead."""
    total = len(serialize(c))
    sizes = {"B_K": len(c.b_k.data), "B_P": len(c.b_p.data), "B_C": 24 * c.b_c.frame_count}
    sizes["overhead"] = total - sum(sizes.values())
    sizes["total"] = total
    return sizes


def total_rate(c: CgvcContainer, meta: VideoMeta | None = None) -> dict:
    """kbps of the whole container and of each component over the video's duration."""
    meta = meta or c.meta
    return {k: measure_rate(8 * v, meta.fps, meta.frame_count) for k, v in section_sizes(c).items()}


def write_container(c: CgvcContainer, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(c))


def read_container(path) -> CgvcContainer:
    with open(path, "rb") as fh:
        return parse(fh.read())
