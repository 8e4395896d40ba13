import pytest
from hypothesis import given, strategies as st

from flowcodec.bitstream import (
    BitReader,
    BitstreamError,
    BitWriter,
    se_bits,
    se_to_ue,
    ue_bits,
    ue_to_se,
)


def code_bits(write, value) -> str:
    w = BitWriter()
    write(w, value)
    n = w.bit_length
    w.align()
    return "".join(f"{b:08b}" for b in w.getvalue())[:n]


# Classic exp-Golomb codewords.
UE_TABLE = {0: "1", 1: "010", 2: "011", 3: "00100", 4: "00101", 5: "00110",
            6: "00111", 7: "0001000", 8: "0001001"}
SE_TABLE = {0: "1", 1: "010", -1: "011", 2: "00100", -2: "00101", 3: "00110",
            -3: "00111", 4: "0001000"}


def test_unsigned_codewords():
    for value, code in UE_TABLE.items():
        assert code_bits(BitWriter.write_ue, value) == code


def test_signed_codewords():
    for value, code in SE_TABLE.items():
        assert code_bits(BitWriter.write_se, value) == code


def test_bit_lengths_match_writer():
    for v in range(0, 2000):
        assert ue_bits(v) == len(code_bits(BitWriter.write_ue, v))
    for v in range(-300, 300):
        assert se_bits(v) == len(code_bits(BitWriter.write_se, v))


def test_signed_mapping_roundtrip():
    for v in range(-1000, 1001):
        assert ue_to_se(se_to_ue(v)) == v


@given(st.lists(st.integers(0, 10**6)))
def test_ue_roundtrip(values):
    w = BitWriter()
    for v in values:
        w.write_ue(v)
    w.align()
    r = BitReader(w.getvalue())
    assert [r.read_ue() for _ in values] == values


@given(st.lists(st.integers(-10**6, 10**6)))
def test_se_roundtrip(values):
    w = BitWriter()
    for v in values:
        w.write_se(v)
    w.align()
    r = BitReader(w.getvalue())
    assert [r.read_se() for _ in values] == values


def test_write_bits_and_read_bits():
    w = BitWriter()
    w.write_bits(0b101, 3)
    w.write_bits(0, 2)
    w.write_bits(0x7FF, 11)
    pad = w.align()
    assert pad == 0  # 16 bits already aligned
    r = BitReader(w.getvalue())
    assert r.read_bits(3) == 0b101
    assert r.read_bits(2) == 0
    assert r.read_bits(11) == 0x7FF


def test_align_pads_with_zeros():
    w = BitWriter()
    w.write_bits(1, 1)
    assert w.align() == 7
    assert w.getvalue() == b"\x80"


def test_getvalue_requires_alignment():
    w = BitWriter()
    w.write_bits(1, 3)
    with pytest.raises(ValueError):
        w.getvalue()


def test_write_bits_validates():
    w = BitWriter()
    with pytest.raises(ValueError):
        w.write_bits(4, 2)
    with pytest.raises(ValueError):
        w.write_bits(-1, 4)


def test_reader_overrun_reports_position():
    r = BitReader(b"\x00")
    r.read_bits(8)
    with pytest.raises(BitstreamError, match="bit 8"):
        r.read_bits(1)


def test_reader_bytes_need_alignment():
    r = BitReader(b"\xff\x00")
    r.read_bits(3)
    with pytest.raises(BitstreamError):
        r.read_bytes(1)
    r.align()
    assert r.read_bytes(1) == b"\x00"


def test_interleaved_bytes_and_codes():
    w = BitWriter()
    w.write_bytes(b"AB")
    w.write_se(-7)
    w.write_ue(3)
    w.align()
    data = w.getvalue()
    r = BitReader(data)
    assert r.read_bytes(2) == b"AB"
    assert r.read_se() == -7
    assert r.read_ue() == 3
