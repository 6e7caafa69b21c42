import pytest
from hypothesis import given
from hypothesis import strategies as st

from destsim.core import (
    ApproxConfig,
    ConfigError,
    WORD_MASK,
    build_mask,
    bulk_merge,
    bulk_split,
    float32_tolerance_masks,
    float32_truncation_masks,
    merge_chip_words,
    popcount,
    similarity_limit_for_preset,
    split_cache_line,
)

from oracles import layout_chip_words

words_st = st.integers(min_value=0, max_value=WORD_MASK)
lines_st = st.binary(min_size=64, max_size=64)


def test_popcount_basics():
    assert popcount(0x0000000000000000) == 0
    assert popcount(0xFFFFFFFFFFFFFFFF) == 64
    assert popcount(0x8000000000000001) == 2


@given(words_st, words_st)
def test_popcount_xor_symmetry(a, b):
    assert popcount(a ^ b) == popcount(b ^ a)
    assert popcount(a ^ a) == 0


def test_split_single_byte():
    line = bytearray(64)
    line[9] = 0xAB
    words = split_cache_line(bytes(line))
    assert words[1] == 0x000000000000AB00
    assert all(w == 0 for c, w in enumerate(words) if c != 1)


def test_split_zero_line():
    assert split_cache_line(bytes(64)) == [0] * 8


def test_split_sequential_bytes():
    words = split_cache_line(bytes(range(64)))
    # chip 0 collects line bytes {0, 8, ..., 56} in burst order
    assert words[0] == 0x3830282018100800
    assert [(words[0] >> (8 * b)) & 0xFF for b in range(8)] == [0, 8, 16, 24, 32, 40, 48, 56]


@given(lines_st)
def test_split_matches_layout_oracle(line):
    assert split_cache_line(line) == layout_chip_words(line)


@given(lines_st)
def test_merge_inverts_split(line):
    assert merge_chip_words(split_cache_line(line)) == line


def test_merge_zero_words():
    assert merge_chip_words([0] * 8) == bytes(64)


def test_truncation_zeroes_low_nibble_of_each_byte():
    # 4-bit truncation turns 0b01101111 into 0b01100000 in every chunk
    mask = build_mask("truncation", 8, 4)
    word = 0b01101111 * 0x0101010101010101
    assert word & ~mask & WORD_MASK == 0b01100000 * 0x0101010101010101


def test_merge_single_chip():
    words = [0] * 8
    words[1] = 0x000000000000AB00
    line = merge_chip_words(words)
    assert line[9] == 0xAB
    assert sum(line) == 0xAB


def test_split_rejects_short_line():
    with pytest.raises(ValueError):
        split_cache_line(b"\x00" * 63)


@given(st.binary(min_size=0, max_size=8 * 64).filter(lambda b: len(b) % 64 == 0))
def test_bulk_split_matches_scalar(buf):
    words = bulk_split(buf)
    n = len(buf) // 64
    assert words.shape == (n, 8)
    for i in range(n):
        assert [int(w) for w in words[i]] == split_cache_line(buf[64 * i : 64 * (i + 1)])
    assert bulk_merge(words) == buf


class TestBuildMask:
    def test_trunc_8_2(self):
        assert build_mask("truncation", 8, 2) == 0x0303030303030303

    def test_tol_16_4(self):
        assert build_mask("tolerance", 16, 4) == 0xF000F000F000F000

    def test_trunc_zero_bits(self):
        assert build_mask("truncation", 8, 0) == 0

    @pytest.mark.parametrize("width", [8, 16, 32, 64])
    @pytest.mark.parametrize("frac", [4, 8])
    def test_set_bit_count(self, width, frac):
        bits = width // frac
        for kind in ("truncation", "tolerance"):
            assert popcount(build_mask(kind, width, bits)) == 64 * bits // width

    @pytest.mark.parametrize("width", [8, 16, 32, 64])
    def test_trunc_tol_disjoint(self, width):
        trunc = build_mask("truncation", width, width // 4)
        tol = build_mask("tolerance", width, width // 4)
        assert trunc & tol == 0

    def test_rejects_bad_width(self):
        with pytest.raises(ConfigError):
            build_mask("truncation", 12, 2)

    def test_rejects_bits_at_width(self):
        with pytest.raises(ConfigError):
            build_mask("truncation", 8, 8)

    def test_rejects_unknown_kind(self):
        with pytest.raises(ConfigError):
            build_mask("padding", 8, 2)


class TestFloat32Masks:
    def test_tolerance_layout(self):
        masks = float32_tolerance_masks()
        # a value at line offsets {0,1,2,3}: chip 3 holds the sign/exponent
        # byte, chip 2 the exponent LSB, chips 0-1 pure mantissa
        assert masks[3] & 0xFF == 0xFF
        assert masks[2] & 0xFF == 0x80
        assert masks[0] == 0 and masks[1] == 0
        assert masks[4] == 0 and masks[5] == 0
        assert masks[7] == 0xFFFFFFFFFFFFFFFF
        assert masks[6] == 0x8080808080808080

    def test_protected_bits_per_line(self):
        # 16 float32 values per line, 9 protected bits each
        assert sum(popcount(m) for m in float32_tolerance_masks()) == 16 * 9

    @pytest.mark.parametrize("bits", [0, 8, 16, 23])
    def test_trunc_disjoint_from_tolerance(self, bits):
        tols = float32_tolerance_masks()
        truncs = float32_truncation_masks(bits)
        for t, p in zip(truncs, tols):
            assert t & p == 0

    def test_trunc_bit_budget(self):
        # every truncated mantissa bit appears exactly once across chips
        for bits in range(24):
            truncs = float32_truncation_masks(bits)
            assert sum(popcount(m) for m in truncs) == bits * 16

    def test_trunc_rejects_exponent_reach(self):
        with pytest.raises(ConfigError):
            float32_truncation_masks(24)


class TestApproxConfig:
    @pytest.mark.parametrize("percent,bits", [(90, 7), (80, 13), (75, 16), (70, 20)])
    def test_presets(self, percent, bits):
        assert similarity_limit_for_preset(percent) == bits
        assert ApproxConfig.from_preset(percent).similarity_limit_bits == bits

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            similarity_limit_for_preset(85)

    def test_masks_disjoint_for_all_presets(self):
        for width in (8, 16, 32, 64):
            for mode in ("none", "quarter", "eighth"):
                cfg = ApproxConfig(
                    similarity_limit_bits=13,
                    value_width=width,
                    trunc_bits_per_value=width // 4,
                    tol_mode=mode,
                )
                for trunc, tol in cfg.chip_masks():
                    assert trunc & tol == 0

    def test_float32_masks_per_chip(self):
        cfg = ApproxConfig(value_width=32, trunc_bits_per_value=12, tol_mode="float32")
        masks = cfg.chip_masks()
        assert [tol for _, tol in masks] == float32_tolerance_masks()
        assert [tr for tr, _ in masks] == float32_truncation_masks(12)

    def test_rejects_overlapping_budget(self):
        with pytest.raises(ConfigError):
            ApproxConfig(value_width=8, trunc_bits_per_value=7, tol_mode="quarter")

    def test_rejects_trunc_at_width(self):
        with pytest.raises(ConfigError):
            ApproxConfig(value_width=8, trunc_bits_per_value=8)

    def test_rejects_bad_limit(self):
        with pytest.raises(ConfigError):
            ApproxConfig(similarity_limit_bits=65)

    def test_float32_requires_width_32(self):
        with pytest.raises(ConfigError):
            ApproxConfig(value_width=8, tol_mode="float32")
