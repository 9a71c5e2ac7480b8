"""
Bit I/O
MSB-first bit writer and reader used by the gradient stream codec
"""

from typing import Iterable, Optional


class BitstreamError(ValueError):
    """Raised when a bit section is malformed; carries the failing bit offset"""

    def __init__(self, message: str, bit_offset: Optional[int] = None):
        self.reason = message
        self.bit_offset = bit_offset
        if bit_offset is not None:
            message = f"{message} (at bit offset {bit_offset})"
        super().__init__(message)


class BitWriter:
    """
    Accumulates bits in memory and packs them MSB-first into bytes.
    The last byte is zero-padded on the right.
    """

    def __init__(self):
        self._chunks = []
        self.bit_count = 0

    def write(self, value: int, nbits: int):
        """Append ``value`` as an ``nbits`` wide big-endian bit field"""
        if nbits == 0:
            return
        if value < 0 or value >> nbits:
            raise ValueError(f"Value {value} does not fit in {nbits} bits")
        self._chunks.append(format(value, f'0{nbits}b'))
        self.bit_count += nbits

    def write_bits(self, bits: str):
        """Append a pre-formatted string of '0'/'1' characters"""
        if bits:
            self._chunks.append(bits)
            self.bit_count += len(bits)

    def write_many(self, codes: Iterable[str]):
        for code in codes:
            self.write_bits(code)

    def getvalue(self) -> bytes:
        """Packed bytes, final byte padded with zeros"""
        if self.bit_count == 0:
            return b''
        bits = ''.join(self._chunks)
        self._chunks = [bits]
        padding = (8 - self.bit_count % 8) % 8
        nbytes = (self.bit_count + padding) // 8
        return int(bits + '0' * padding, 2).to_bytes(nbytes, 'big')


class BitReader:
    """Reads bit fields MSB-first from a byte buffer holding ``bit_length`` valid bits"""

    def __init__(self, data: bytes, bit_length: int, base_offset: int = 0):
        if bit_length > len(data) * 8:
            raise BitstreamError(
                f"Section declares {bit_length} bits but holds only {len(data) * 8}",
                base_offset + len(data) * 8,
            )
        self._bits = ''.join(format(b, '08b') for b in data)[:bit_length]
        self.bit_length = bit_length
        self.position = 0
        # Offset of this section inside the whole stream, for diagnostics
        self.base_offset = base_offset

    @property
    def remaining(self) -> int:
        return self.bit_length - self.position

    @property
    def offset(self) -> int:
        return self.base_offset + self.position

    def read(self, nbits: int) -> int:
        if nbits == 0:
            return 0
        if nbits > self.remaining:
            raise BitstreamError(f"Truncated section: need {nbits} bits, {self.remaining} left",
                                 self.offset)
        value = int(self._bits[self.position:self.position + nbits], 2)
        self.position += nbits
        return value

    def read_bit(self) -> int:
        if self.position >= self.bit_length:
            raise BitstreamError("Truncated section: no bits left", self.offset)
        bit = 1 if self._bits[self.position] == '1' else 0
        self.position += 1
        return bit
