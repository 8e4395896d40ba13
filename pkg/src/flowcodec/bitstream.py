"""MSB-first bit packing with exponential-Golomb codes.

Unsigned values v map to the codeword 0^(n-1) ++ bin(v+1) where
n = bitlength(v+1).  Signed values use the alternating mapping
s > 0 -> 2s-1, s <= 0 -> -2s, so 0 costs a single bit.
"""
from __future__ import annotations


class BitstreamError(ValueError):
    """Malformed or exhausted bitstream."""


def se_to_ue(value: int) -> int:
    return 2 * value - 1 if value > 0 else -2 * value


def ue_to_se(value: int) -> int:
    return (value + 1) // 2 if value % 2 else -(value // 2)


def ue_bits(value: int) -> int:
    """Code length in bits of an unsigned exp-Golomb value."""
    if value < 0:
        raise ValueError("unsigned exp-Golomb value must be >= 0")
    return 2 * (value + 1).bit_length() - 1


def se_bits(value: int) -> int:
    """Code length in bits of a signed exp-Golomb value."""
    return ue_bits(se_to_ue(value))


class BitWriter:
    """Accumulates bits MSB-first into a growable byte buffer."""

    def __init__(self):
        self._bytes = bytearray()
        self._acc = 0
        self._nbits = 0

    @property
    def bit_length(self) -> int:
        return len(self._bytes) * 8 + self._nbits

    def write_bits(self, value: int, count: int) -> None:
        if count < 0 or value < 0 or value.bit_length() > count:
            raise ValueError(f"cannot write {value} in {count} bits")
        self._acc = (self._acc << count) | value
        self._nbits += count
        while self._nbits >= 8:
            self._nbits -= 8
            self._bytes.append((self._acc >> self._nbits) & 0xFF)
        self._acc &= (1 << self._nbits) - 1

    def write_ue(self, value: int) -> None:
        n = (value + 1).bit_length()
        self.write_bits(value + 1, 2 * n - 1)

    def write_se(self, value: int) -> None:
        self.write_ue(se_to_ue(value))

    def align(self) -> int:
        """Pad with zero bits to the next byte boundary; returns pad size."""
        pad = (8 - self._nbits) % 8
        if pad:
            self.write_bits(0, pad)
        return pad

    def write_bytes(self, data: bytes) -> None:
        if self._nbits:
            raise ValueError("write_bytes requires byte alignment")
        self._bytes += data

    def getvalue(self) -> bytes:
        if self._nbits:
            raise ValueError("bitstream not byte aligned; call align() first")
        return bytes(self._bytes)


class BitReader:
    """Reads bits MSB-first from a bytes object, with position reporting."""

    def __init__(self, data: bytes, bit_pos: int = 0):
        self._data = data
        self._pos = bit_pos
        self._end = len(data) * 8

    @property
    def bit_pos(self) -> int:
        return self._pos

    def read_bits(self, count: int) -> int:
        if count < 0 or self._pos + count > self._end:
            raise BitstreamError(f"bitstream overrun reading {count} bits at bit {self._pos}")
        if count == 0:
            return 0
        start = self._pos >> 3
        stop = (self._pos + count + 7) >> 3
        chunk = int.from_bytes(self._data[start:stop], "big")
        shift = stop * 8 - self._pos - count
        self._pos += count
        return (chunk >> shift) & ((1 << count) - 1)

    def _read_bit(self) -> int:
        if self._pos >= self._end:
            raise BitstreamError(f"bitstream overrun at bit {self._pos}")
        bit = (self._data[self._pos >> 3] >> (7 - (self._pos & 7))) & 1
        self._pos += 1
        return bit

    def read_ue(self) -> int:
        zeros = 0
        while self._read_bit() == 0:
            zeros += 1
            if zeros > 63:
                raise BitstreamError(f"exp-Golomb prefix too long at bit {self._pos}")
        if zeros == 0:
            return 0
        return ((1 << zeros) | self.read_bits(zeros)) - 1

    def read_se(self) -> int:
        return ue_to_se(self.read_ue())

    def align(self) -> None:
        self._pos += (8 - (self._pos & 7)) % 8

    def read_bytes(self, count: int) -> bytes:
        if self._pos & 7:
            raise BitstreamError(f"read_bytes requires byte alignment (bit {self._pos})")
        start = self._pos >> 3
        if (start + count) * 8 > self._end:
            raise BitstreamError(f"bitstream overrun reading {count} bytes at bit {self._pos}")
        self._pos += count * 8
        return self._data[start:start + count]
