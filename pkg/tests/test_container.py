import struct
import zlib
from pathlib import Path

import numpy as np
import pytest

from cgvc.codec import CodecSpec, EncodedStream, encode_stream
from cgvc.color_correction import ColorParams, compute_color_params
from cgvc.container import (CgvcContainer, HEADER, HEADER_CRC, TABLE_ENTRY, parse, read_container,
                            section_sizes, serialize, total_rate, write_container)
from cgvc.control_prior import PriorKind
from cgvc.errors import BadMagic, CrcMismatch, PlanOutOfRange, TruncatedSection, UnsupportedVersion
from cgvc.frame_io import VideoMeta, gray_frame, yuv_to_rgb
from cgvc.keyframes import KeyframePlan

GOLDEN = Path(__file__).parent / "data" / "minimal.cgvc"


def minimal():
    frames = [gray_frame(1, 4, 4, 60), gray_frame(2, 4, 4, 200)]
    return CgvcContainer(
        meta=VideoMeta(4, 4, 2),
        plan=KeyframePlan((1, 2), 2),
        prior_kind=PriorKind.LUMA,
        codec_id=0,
        b_k=encode_stream(frames, CodecSpec()),
        b_p=EncodedStream.empty(),
        b_c=compute_color_params([yuv_to_rgb(f) for f in frames]),
    )


def empty_container(T):
    return CgvcContainer(VideoMeta(2, 2, T), KeyframePlan(tuple(range(1, T + 1)), T), PriorKind.LUMA, 0,
                         EncodedStream(b"", 0, T), EncodedStream.empty(),
                         ColorParams(np.zeros((T, 3), np.int64), np.zeros((T, 3), np.int64)))


def test_golden_bytes():
    assert serialize(minimal()) == GOLDEN.read_bytes()
    assert parse(GOLDEN.read_bytes()) == minimal()


def test_deterministic_and_layout():
    c = minimal()
    blob = serialize(c)
    assert blob == serialize(c)
    payload = sum(struct.unpack_from("<4sII", blob, HEADER.size + i * TABLE_ENTRY.size)[1] for i in range(4))
    assert len(blob) == HEADER.size + 4 * TABLE_ENTRY.size + HEADER_CRC.size + payload


def _section_offset(blob, index):
    pos = HEADER.size + 4 * TABLE_ENTRY.size + HEADER_CRC.size
    for i in range(index):
        pos += struct.unpack_from("<4sII", blob, HEADER.size + i * TABLE_ENTRY.size)[1]
    return pos


@pytest.mark.parametrize("index,name", [(0, "PLAN"), (1, "B_K"), (3, "B_C")])
def test_payload_corruption_names_the_section(index, name):
    blob = bytearray(serialize(minimal()))
    blob[_section_offset(blob, index)] ^= 0x40
    with pytest.raises(CrcMismatch) as info:
        parse(bytes(blob))
    assert info.value.section == name


def test_b_p_corruption():
    c = minimal()
    c = CgvcContainer(c.meta, c.plan, c.prior_kind, c.codec_id, c.b_k, EncodedStream(b"xyz", 0, 0), c.b_c)
    blob = bytearray(serialize(c))
    blob[_section_offset(blob, 2) + 6] ^= 1
    with pytest.raises(CrcMismatch) as info:
        parse(bytes(blob))
    assert info.value.section == "B_P"


def test_bad_magic_and_version():
    blob = bytearray(serialize(minimal()))
    with pytest.raises(BadMagic):
        parse(b"XGVC" + bytes(blob[4:]))
    blob[4:6] = struct.pack("<H", 9)
    head = bytes(blob[:HEADER.size + 4 * TABLE_ENTRY.size])
    blob[len(head):len(head) + 4] = struct.pack("<I", zlib.crc32(head))
    with pytest.raises(UnsupportedVersion):
        parse(bytes(blob))


def test_truncation():
    blob = serialize(minimal())
    with pytest.raises(TruncatedSection):
        parse(blob[:-1])
    with pytest.raises(TruncatedSection):
        parse(blob[:10])


def test_plan_out_of_range():
    c = minimal()
    bad = bytearray(serialize(c))
    start = _section_offset(bad, 0)
    plan = struct.pack("<III", 2, 1, 7)
    table_pos = HEADER.size
    bad[start:start + 12] = plan
    bad[table_pos:table_pos + 12] = TABLE_ENTRY.pack(b"PLAN", 12, zlib.crc32(plan))
    head = bytes(bad[:HEADER.size + 4 * TABLE_ENTRY.size])
    bad[len(head):len(head) + 4] = struct.pack("<I", zlib.crc32(head))
    with pytest.raises(PlanOutOfRange):
        parse(bytes(bad))


def test_rate_breakdown():
    c = empty_container(100)
    sizes = section_sizes(c)
    assert sizes["B_C"] == 2400
    rate = total_rate(c)
    assert rate["overhead"] > 0
    assert rate["B_K"] + rate["B_P"] + rate["B_C"] + rate["overhead"] == pytest.approx(rate["total"])


def test_file_round_trip(tmp_path):
    write_container(minimal(), tmp_path / "x.cgvc")
    assert read_container(tmp_path / "x.cgvc") == minimal()
