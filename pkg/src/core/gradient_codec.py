"""
Gradient Codec Module
Lossless stream coding of quantized gradient maps: run-length coding with
state-reduced transition codes, 255-segmented counters and canonical Huffman
coding of the counter symbols.
"""

import heapq
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.sensor_sim import GradientMap, Lattice, QuantScheme, SchemeId
from utils.bitio import BitReader, BitstreamError, BitWriter
from utils.logger import get_logger

logger = get_logger(__name__)

MAGIC = b'GCV1'
STREAM_SUFFIX = '.gcs'
COUNTER_SYMBOLS = 256
SEGMENT_CONTINUE = 255

DIRECTION_CODES = {'x': 0, 'y': 1}

_DIMS = struct.Struct('<II')
_SCHEME = struct.Struct('<BBB')
_SECTIONS = struct.Struct('<II')


class CodecError(BitstreamError):
    """Raised on corrupt, truncated or desynchronised streams"""


# ---------------------------------------------------------------- run-length

def rlc_encode(m: GradientMap) -> Tuple[int, List[int], List[int]]:
    """
    Split the transmitted samples of ``m`` into maximal runs.

    Returns ``(first_level, transitions, counters)``: one transition value per
    run after the first, and each run length written as 255-valued continuation
    segments followed by a terminating segment below 255.
    """
    samples = np.asarray(m.samples(), dtype=np.int64)
    if not np.all(np.isin(samples, m.scheme.levels)):
        raise CodecError(f"Map holds levels outside alphabet {m.scheme.levels}")
    if samples.size == 0:
        return 0, [], []

    starts = np.concatenate(([0], np.flatnonzero(np.diff(samples)) + 1))
    lengths = np.diff(np.append(starts, samples.size))
    run_levels = samples[starts]

    counters = []
    for length in lengths.tolist():
        counters.extend(segment_run(length))
    return int(run_levels[0]), run_levels[1:].tolist(), counters


def segment_run(length: int) -> List[int]:
    """255, 255, ..., remainder; a run of exactly 255 ends with a 0 segment"""
    if length <= 0:
        raise ValueError(f"Run length must be positive, got {length}")
    full, remainder = divmod(length, SEGMENT_CONTINUE)
    return [SEGMENT_CONTINUE] * full + [remainder]


def transition_bits(levels: Sequence[int]) -> int:
    """Bits per transition code: the current level is excluded from the alphabet"""
    candidates = len(levels) - 1
    return (candidates - 1).bit_length()


def encode_transition(prev_level: int, next_level: int, scheme: QuantScheme) -> int:
    """Index of ``next_level`` among the alphabet without ``prev_level`` (ascending)"""
    if next_level == prev_level:
        raise ValueError(f"Level {next_level} repeated; not a transition")
    if prev_level not in scheme.levels or next_level not in scheme.levels:
        raise ValueError(f"Transition {prev_level}->{next_level} outside {scheme.levels}")
    candidates = [lv for lv in scheme.levels if lv != prev_level]
    return candidates.index(next_level)


def decode_transition(prev_level: int, code: int, scheme: QuantScheme) -> int:
    candidates = [lv for lv in scheme.levels if lv != prev_level]
    if not 0 <= code < len(candidates):
        raise ValueError(f"Transition code {code} unused after level {prev_level}")
    return candidates[code]


# ------------------------------------------------------------------- Huffman

@dataclass(frozen=True)
class HuffmanTable:
    """Canonical Huffman code over counter symbols 0..255, described by code lengths"""
    lengths: Tuple[int, ...]

    def __post_init__(self):
        if len(self.lengths) != COUNTER_SYMBOLS:
            raise ValueError(f"Need {COUNTER_SYMBOLS} code lengths, got {len(self.lengths)}")
        used = [n for n in self.lengths if n]
        if any(n > 255 for n in used):
            raise ValueError("Code lengths must fit in one byte")
        # Kraft sum must be <= 1 for a prefix code
        if used and sum(2.0 ** -n for n in used) > 1.0 + 1e-12:
            raise ValueError("Code lengths violate the Kraft inequality")

    @property
    def codes(self) -> Dict[int, str]:
        """Symbol -> bit string, assigned in (length, symbol) order"""
        ordered = sorted((n, sym) for sym, n in enumerate(self.lengths) if n)
        codes = {}
        code = 0
        prev_len = ordered[0][0] if ordered else 0
        for n, sym in ordered:
            code <<= n - prev_len
            codes[sym] = format(code, f'0{n}b')
            code += 1
            prev_len = n
        return codes

    @property
    def decode_map(self) -> Dict[str, int]:
        return {bits: sym for sym, bits in self.codes.items()}

    def serialize(self) -> bytes:
        """Run-length compressed length list: u16 pair count, then (run - 1, length) bytes"""
        pairs = []
        for n in self.lengths:
            if pairs and pairs[-1][1] == n:
                pairs[-1][0] += 1
            else:
                pairs.append([1, n])
        out = bytearray(struct.pack('<H', len(pairs)))
        for run, n in pairs:
            out += bytes((run - 1, n))
        return bytes(out)

    @classmethod
    def deserialize(cls, data: bytes, offset: int = 0) -> Tuple['HuffmanTable', int]:
        """Parse a serialized table at ``offset``; returns the table and the next offset"""
        try:
            (count,) = struct.unpack_from('<H', data, offset)
        except struct.error as e:
            raise CodecError("Truncated Huffman table", offset * 8) from e
        offset += 2
        body = data[offset:offset + 2 * count]
        if len(body) < 2 * count:
            raise CodecError("Truncated Huffman table", offset * 8)

        lengths = []
        for i in range(count):
            lengths.extend([body[2 * i + 1]] * (body[2 * i] + 1))
        if len(lengths) != COUNTER_SYMBOLS:
            raise CodecError(f"Huffman table covers {len(lengths)} symbols", offset * 8)
        try:
            table = cls(tuple(lengths))
        except ValueError as e:
            raise CodecError(str(e), offset * 8) from e
        return table, offset + 2 * count


def huffman_build(histogram: Union[Sequence[int], Dict[int, int]]) -> HuffmanTable:
    """
    Code lengths from symbol frequencies.

    Ties are broken by the smallest symbol in each subtree so equal histograms
    always give equal tables. A lone symbol gets a 1-bit code.
    """
    if isinstance(histogram, dict):
        counts = [0] * COUNTER_SYMBOLS
        for sym, freq in histogram.items():
            counts[sym] = freq
    else:
        counts = list(histogram)
    if len(counts) != COUNTER_SYMBOLS:
        raise ValueError(f"Histogram must cover {COUNTER_SYMBOLS} symbols")

    lengths = [0] * COUNTER_SYMBOLS
    heap = [(freq, sym, [sym]) for sym, freq in enumerate(counts) if freq > 0]
    if not heap:
        return HuffmanTable(tuple(lengths))
    if len(heap) == 1:
        lengths[heap[0][1]] = 1
        return HuffmanTable(tuple(lengths))

    heapq.heapify(heap)
    while len(heap) > 1:
        f1, k1, syms1 = heapq.heappop(heap)
        f2, k2, syms2 = heapq.heappop(heap)
        for sym in syms1 + syms2:
            lengths[sym] += 1
        heapq.heappush(heap, (f1 + f2, min(k1, k2), syms1 + syms2))
    return HuffmanTable(tuple(lengths))


def huffman_encode(symbols: Sequence[int], table: HuffmanTable, writer: BitWriter):
    codes = table.codes
    try:
        writer.write_many(codes[s] for s in symbols)
    except KeyError as e:
        raise ValueError(f"Symbol {e.args[0]} has no Huffman code") from e


def huffman_decode_symbol(reader: BitReader, decode_map: Dict[str, int], max_len: int) -> int:
    start = reader.offset
    bits = ''
    while len(bits) < max_len:
        if reader.remaining == 0:
            raise CodecError("Counter section ended inside a Huffman code", start)
        bits += '1' if reader.read_bit() else '0'
        symbol = decode_map.get(bits)
        if symbol is not None:
            return symbol
    raise CodecError(f"Huffman desync: {bits} is not a code", start)


def huffman_decode(reader: BitReader, table: HuffmanTable,
                   count: Optional[int] = None) -> Iterator[int]:
    """Yield ``count`` symbols, or every symbol up to the end of the reader"""
    decode_map = table.decode_map
    max_len = max(table.lengths)
    decoded = 0
    while decoded != count and (count is not None or reader.remaining):
        yield huffman_decode_symbol(reader, decode_map, max_len)
        decoded += 1


# -------------------------------------------------------------------- stream

@dataclass(frozen=True)
class EncodedStream:
    """Self-describing encoded gradient map"""
    width: int
    height: int
    scheme: QuantScheme
    direction: str
    first_level: int
    huffman: HuffmanTable
    value_bits: int
    counter_bits: int
    value_section: bytes
    counter_section: bytes

    @property
    def lattice(self) -> Lattice:
        return self.scheme.lattice(self.direction)

    def header_bytes(self) -> bytes:
        out = bytearray(MAGIC)
        out += _DIMS.pack(self.width, self.height)
        out += _SCHEME.pack(self.scheme.scheme_id.code, DIRECTION_CODES[self.direction],
                            len(self.scheme.thresholds))
        out += struct.pack(f'<{len(self.scheme.thresholds)}h', *self.scheme.thresholds)
        out += struct.pack('<b', self.first_level)
        out += self.huffman.serialize()
        out += _SECTIONS.pack(self.value_bits, self.counter_bits)
        return bytes(out)

    def to_bytes(self) -> bytes:
        return self.header_bytes() + self.value_section + self.counter_section

    @property
    def bit_length(self) -> int:
        """Total stream size in bits, header and section padding included"""
        return 8 * (len(self.header_bytes()) + len(self.value_section) + len(self.counter_section))

    def summary(self) -> Dict[str, int]:
        return {
            'header_bits': 8 * len(self.header_bytes()),
            'value_bits': self.value_bits,
            'counter_bits': self.counter_bits,
            'total_bits': self.bit_length,
        }

    @classmethod
    def from_bytes(cls, data: bytes) -> 'EncodedStream':
        if data[:4] != MAGIC:
            raise CodecError(f"Bad magic {data[:4]!r}, expected {MAGIC!r}", 0)
        offset = 4
        try:
            width, height = _DIMS.unpack_from(data, offset)
            offset += _DIMS.size
            scheme_code, direction_code, n_thresholds = _SCHEME.unpack_from(data, offset)
            offset += _SCHEME.size
            thresholds = struct.unpack_from(f'<{n_thresholds}h', data, offset)
            offset += 2 * n_thresholds
            (first_level,) = struct.unpack_from('<b', data, offset)
            offset += 1
        except struct.error as e:
            raise CodecError("Truncated header", offset * 8) from e
        if width == 0 or height == 0:
            raise CodecError(f"Empty map dimensions {width}x{height}", 32)

        directions = {code: name for name, code in DIRECTION_CODES.items()}
        try:
            scheme = QuantScheme.from_id(SchemeId.from_code(scheme_code), thresholds)
            direction = directions[direction_code]
            scheme.lattice(direction)
        except (ValueError, KeyError) as e:
            raise CodecError(f"Invalid scheme fields: {e}", 8 * 12) from e
        if first_level not in scheme.levels:
            raise CodecError(f"First level {first_level} outside {scheme.levels}", 8 * (offset - 1))

        huffman, offset = HuffmanTable.deserialize(data, offset)
        try:
            value_bits, counter_bits = _SECTIONS.unpack_from(data, offset)
        except struct.error as e:
            raise CodecError("Truncated header", offset * 8) from e
        offset += _SECTIONS.size

        value_len = (value_bits + 7) // 8
        counter_len = (counter_bits + 7) // 8
        if len(data) - offset < value_len + counter_len:
            raise CodecError(
                f"Truncated sections: need {value_len + counter_len} bytes, "
                f"have {len(data) - offset}", len(data) * 8)
        if len(data) - offset > value_len + counter_len:
            raise CodecError("Trailing bytes after counter section",
                             (offset + value_len + counter_len) * 8)

        return cls(
            width=width,
            height=height,
            scheme=scheme,
            direction=direction,
            first_level=first_level,
            huffman=huffman,
            value_bits=value_bits,
            counter_bits=counter_bits,
            value_section=data[offset:offset + value_len],
            counter_section=data[offset + value_len:],
        )


def encode(m: GradientMap) -> EncodedStream:
    """Encode a gradient map into a self-describing stream"""
    first_level, transitions, counters = rlc_encode(m)
    n_bits = transition_bits(m.scheme.levels)
    transition_codes = {
        (prev, nxt): encode_transition(prev, nxt, m.scheme)
        for prev in m.scheme.levels for nxt in m.scheme.levels if prev != nxt
    }

    values = BitWriter()
    prev = first_level
    for level in transitions:
        values.write(transition_codes[prev, level], n_bits)
        prev = level

    histogram = np.bincount(np.asarray(counters, dtype=np.int64), minlength=COUNTER_SYMBOLS)
    table = huffman_build(histogram.tolist())
    counter_writer = BitWriter()
    huffman_encode(counters, table, counter_writer)

    stream = EncodedStream(
        width=m.width,
        height=m.height,
        scheme=m.scheme,
        direction=m.direction,
        first_level=first_level,
        huffman=table,
        value_bits=values.bit_count,
        counter_bits=counter_writer.bit_count,
        value_section=values.getvalue(),
        counter_section=counter_writer.getvalue(),
    )
    logger.debug(
        f"Encoded {m.direction}-map {m.width}x{m.height}: {len(transitions) + 1} runs, "
        f"{stream.bit_length} bits"
    )
    return stream


def decode(s: EncodedStream) -> GradientMap:
    """Rebuild the gradient map from a stream"""
    scheme = s.scheme
    lattice = s.lattice
    total = lattice.count(s.height, s.width)
    # every counter code is at least one bit and carries at most 255 samples
    if total > SEGMENT_CONTINUE * s.counter_bits:
        raise CodecError(
            f"{s.width}x{s.height} map needs {total} samples, "
            f"{s.counter_bits} counter bits carry at most {SEGMENT_CONTINUE * s.counter_bits}", 32)
    header_bits = 8 * len(s.header_bytes())

    values = BitReader(s.value_section, s.value_bits, header_bits)
    counters = BitReader(s.counter_section, s.counter_bits,
                         header_bits + 8 * len(s.value_section))
    n_bits = transition_bits(scheme.levels)
    symbols = huffman_decode(counters, s.huffman)

    run_levels = []
    run_lengths = []
    level = s.first_level
    filled = 0
    try:
        while filled < total:
            if run_levels:
                offset = values.offset
                try:
                    level = decode_transition(level, values.read(n_bits), scheme)
                except BitstreamError:
                    raise
                except ValueError as e:
                    raise CodecError(str(e), offset) from e

            run = 0
            while True:
                segment = next(symbols, None)
                if segment is None:
                    raise CodecError("Counter section ended before the map was covered",
                                     counters.offset)
                run += segment
                if segment != SEGMENT_CONTINUE:
                    break
            if run == 0:
                raise CodecError("Zero-length run", counters.offset)

            run_levels.append(level)
            run_lengths.append(run)
            filled += run
    except CodecError:
        raise
    except BitstreamError as e:
        raise CodecError(e.reason, e.bit_offset) from e

    if filled != total:
        raise CodecError(f"Runs cover {filled} samples, map has {total}", counters.offset)
    if values.remaining:
        raise CodecError(f"{values.remaining} unread bits in value section", values.offset)
    if counters.remaining:
        raise CodecError(f"{counters.remaining} unread bits in counter section", counters.offset)

    levels = np.zeros((s.height, s.width), dtype=np.int8)
    levels[lattice.mask(s.height, s.width)] = np.repeat(np.asarray(run_levels, dtype=np.int8), run_lengths)
    return GradientMap(levels, s.direction, scheme, lattice)


def compression_ratio(s: EncodedStream, baseline_bits_per_pixel: float = 8.0) -> float:
    """Stream bits over the raw size of the frame at the baseline bit depth"""
    return s.bit_length / (s.width * s.height * baseline_bits_per_pixel)


def write_stream(path: Union[str, Path], stream: EncodedStream) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(stream.to_bytes())
    return path


def read_stream(path: Union[str, Path]) -> EncodedStream:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ValueError(f"Cannot read stream {path}: {e}") from e
    return EncodedStream.from_bytes(data)
