"""Bit-level domain types: chip words, cache-line layout, approximation masks.

A cache line is 64 bytes, transferred over 8 x8 DRAM chips in 8 bursts.
Chip words are plain 64-bit ints: bit ``b*8 + l`` is lane ``l`` of burst
``b``, so byte ``b`` of the int is the byte the chip emits on burst ``b``.
Cache lines are ``bytes`` of length 64; masks are plain 64-bit ints.

Layout rule (fixed for the whole package): line byte ``j`` belongs to chip
``j % 8``, burst ``j // 8``, and burst 0 is the least-significant byte of
the chip word.  One 8-bit pixel therefore lands wholly inside one
chip-burst byte.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LINE_BYTES = 64
CHIPS_PER_LINE = 8
BURSTS_PER_WORD = 8
LANES_PER_CHIP = 8
WORD_BITS = 64
WORD_MASK = (1 << 64) - 1

#: Similarity presets: percentage of bits that must match -> maximum number
#: of dissimilar non-truncated bits allowed for a skip.
SIMILARITY_PRESETS = {90: 7, 80: 13, 75: 16, 70: 20}

VALUE_WIDTHS = (8, 16, 32, 64)

TOL_MODES = ("none", "quarter", "eighth", "float32")


class ConfigError(ValueError):
    """Invalid encoder/mask configuration."""


def popcount(w: int) -> int:
    """Number of set bits (hamming weight) of a 64-bit word."""
    return w.bit_count()


def similarity_limit_for_preset(percent: int) -> int:
    """Map a similarity percentage preset (90/80/75/70) to its bit limit."""
    try:
        return SIMILARITY_PRESETS[percent]
    except KeyError:
        raise ConfigError(
            f"unknown similarity preset {percent}%; "
            f"valid presets: {sorted(SIMILARITY_PRESETS, reverse=True)}"
        ) from None


def split_cache_line(line: bytes) -> list[int]:
    """Split a 64-byte cache line into the 8 chip words that transfer it.

    Byte ``j`` of the line maps to chip ``j % 8``, burst ``j // 8``; each
    chip word concatenates its 8 bytes in burst order, burst 0 least
    significant.
    """
    if len(line) != LINE_BYTES:
        raise ValueError(f"cache line must be {LINE_BYTES} bytes, got {len(line)}")
    words = []
    for c in range(CHIPS_PER_LINE):
        w = 0
        for b in range(BURSTS_PER_WORD):
            w |= line[b * 8 + c] << (8 * b)
        words.append(w)
    return words


def merge_chip_words(words: list[int]) -> bytes:
    """Exact inverse of :func:`split_cache_line`."""
    if len(words) != CHIPS_PER_LINE:
        raise ValueError(f"need {CHIPS_PER_LINE} chip words, got {len(words)}")
    line = bytearray(LINE_BYTES)
    for c, w in enumerate(words):
        for b in range(BURSTS_PER_WORD):
            line[b * 8 + c] = (w >> (8 * b)) & 0xFF
    return bytes(line)


def bulk_split(data: bytes | np.ndarray) -> np.ndarray:
    """Split whole buffers into chip words: returns a (n_lines, 8) uint64 array.

    Row i column c equals ``split_cache_line(line_i)[c]``.
    """
    arr = np.frombuffer(data, dtype=np.uint8) if not isinstance(data, np.ndarray) else data
    if arr.size % LINE_BYTES:
        raise ValueError("buffer length must be a multiple of 64 bytes")
    n = arr.size // LINE_BYTES
    # [line, burst, chip] -> [line, chip, burst]; bursts little-endian per word
    cube = arr.reshape(n, BURSTS_PER_WORD, CHIPS_PER_LINE).transpose(0, 2, 1)
    return np.ascontiguousarray(cube).view("<u8").reshape(n, CHIPS_PER_LINE)


def bulk_merge(words: np.ndarray) -> bytes:
    """Inverse of :func:`bulk_split`: (n_lines, 8) uint64 array to raw bytes."""
    if words.ndim != 2 or words.shape[1] != CHIPS_PER_LINE:
        raise ValueError("expected a (n_lines, 8) array of chip words")
    n = words.shape[0]
    cube = np.ascontiguousarray(words, dtype="<u8").view(np.uint8)
    return cube.reshape(n, CHIPS_PER_LINE, BURSTS_PER_WORD).transpose(0, 2, 1).tobytes()


def build_mask(kind: str, value_width: int, bits_per_value: int) -> int:
    """Build a 64-bit truncation or tolerance mask.

    The chip word is tiled with ``value_width``-bit chunks from bit 0
    upward.  Truncation marks the ``bits_per_value`` LSBs of every chunk;
    tolerance marks the MSBs.
    """
    if value_width not in VALUE_WIDTHS:
        raise ConfigError(f"value_width must be one of {VALUE_WIDTHS}, got {value_width}")
    if not 0 <= bits_per_value < value_width:
        raise ConfigError(
            f"bits_per_value must be in [0, {value_width}), got {bits_per_value}"
        )
    if kind == "truncation":
        chunk = (1 << bits_per_value) - 1
    elif kind == "tolerance":
        chunk = ((1 << bits_per_value) - 1) << (value_width - bits_per_value)
    else:
        raise ConfigError(f"mask kind must be 'truncation' or 'tolerance', got {kind!r}")
    mask = 0
    for off in range(0, WORD_BITS, value_width):
        mask |= chunk << off
    return mask


def float32_tolerance_masks() -> list[int]:
    """Per-chip tolerance masks protecting the sign and exponent of float32 values.

    Trace floats are little-endian, so value byte 3 (sign + 7 exponent bits)
    and bit 7 of byte 2 (exponent LSB) must never be approximated.  Under
    the byte->chip layout a chip always holds the same byte-of-value
    position (``chip % 4``), so the mask is uniform across bursts.
    """
    masks = []
    for c in range(CHIPS_PER_LINE):
        pos = c % 4
        if pos == 3:
            byte_mask = 0xFF
        elif pos == 2:
            byte_mask = 0x80
        else:
            byte_mask = 0x00
        masks.append(byte_mask * 0x0101010101010101)
    return masks


def float32_truncation_masks(mantissa_bits: int) -> list[int]:
    """Per-chip truncation masks zeroing the low ``mantissa_bits`` of each float32.

    Only mantissa bits (value bits 0..22) may be truncated; sign/exponent
    positions are reserved for the tolerance mask.
    """
    if not 0 <= mantissa_bits <= 23:
        raise ConfigError(f"float32 mantissa truncation must be in [0, 23], got {mantissa_bits}")
    value_mask = (1 << mantissa_bits) - 1
    masks = []
    for c in range(CHIPS_PER_LINE):
        pos = c % 4
        byte_mask = (value_mask >> (8 * pos)) & 0xFF
        masks.append(byte_mask * 0x0101010101010101)
    return masks


@dataclass(frozen=True)
class ApproxConfig:
    """Approximation knobs for one data stream.

    similarity_limit_bits: max dissimilar non-truncated bits for a skip.
    value_width: chunk size tiling the chip word (8/16/32/64).
    trunc_bits_per_value: LSBs zeroed and excluded from comparison, per chunk
        (per-value mantissa bits in float32 mode).
    tol_mode: 'none', 'quarter' (top width/4 bits must match exactly),
        'eighth', or 'float32' (sign + exponent protected through the
        cache-line layout).
    approx_allowed: False forces the exact path for the whole stream
        (instruction/exact traffic).
    """

    similarity_limit_bits: int = 0
    value_width: int = 8
    trunc_bits_per_value: int = 0
    tol_mode: str = "none"
    approx_allowed: bool = True

    def __post_init__(self) -> None:
        if not 0 <= self.similarity_limit_bits <= WORD_BITS:
            raise ConfigError(
                f"similarity_limit_bits must be in [0, 64], got {self.similarity_limit_bits}"
            )
        if self.tol_mode not in TOL_MODES:
            raise ConfigError(f"tol_mode must be one of {TOL_MODES}, got {self.tol_mode!r}")
        if self.tol_mode == "float32":
            if self.value_width != 32:
                raise ConfigError("float32 tolerance requires value_width=32")
            if not 0 <= self.trunc_bits_per_value <= 23:
                raise ConfigError("float32 truncation is limited to the 23 mantissa bits")
        else:
            if self.value_width not in VALUE_WIDTHS:
                raise ConfigError(f"value_width must be one of {VALUE_WIDTHS}")
            if not 0 <= self.trunc_bits_per_value < self.value_width:
                raise ConfigError("trunc_bits_per_value must be < value_width")
            # tolerance and truncation must never claim the same bit
            tol_bits = self._tol_bits_per_value()
            if self.trunc_bits_per_value + tol_bits > self.value_width:
                raise ConfigError("truncation and tolerance masks overlap")

    @classmethod
    def from_preset(
        cls,
        percent: int,
        *,
        value_width: int = 8,
        trunc_bits_per_value: int = 0,
        tol_mode: str = "none",
        approx_allowed: bool = True,
    ) -> "ApproxConfig":
        return cls(
            similarity_limit_bits=similarity_limit_for_preset(percent),
            value_width=value_width,
            trunc_bits_per_value=trunc_bits_per_value,
            tol_mode=tol_mode,
            approx_allowed=approx_allowed,
        )

    def _tol_bits_per_value(self) -> int:
        if self.tol_mode == "quarter":
            return self.value_width // 4
        if self.tol_mode == "eighth":
            return self.value_width // 8
        return 0

    def chip_masks(self) -> list[tuple[int, int]]:
        """Resolve to per-chip ``(trunc_mask, tol_mask)`` pairs.

        The masks are uniform across chips except in float32 mode, where
        the sign/exponent protection depends on which byte of each value a
        chip carries.
        """
        if self.tol_mode == "float32":
            truncs = float32_truncation_masks(self.trunc_bits_per_value)
            tols = float32_tolerance_masks()
            return list(zip(truncs, tols))
        trunc = build_mask("truncation", self.value_width, self.trunc_bits_per_value)
        if self.tol_mode == "none":
            tol = 0
        else:
            tol = build_mask("tolerance", self.value_width, self._tol_bits_per_value())
        return [(trunc, tol)] * CHIPS_PER_LINE
