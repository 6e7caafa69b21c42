"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as
they complete.  Expected values come from independent oracles (explicit
enumeration, brute-force scans, closed forms) frozen in `oracles.py`.
"""

import math
import random
import time

import numpy as np
import pytest

from destsim.codec import (
    BdeOrgDecoder,
    BdeOrgEncoder,
    FrameType,
    MbdcDecoder,
    MbdcEncoder,
    dbi_encode,
    make_codec_pair,
    ohe_encode,
)
from destsim.core import (
    ApproxConfig,
    WORD_MASK,
    build_mask,
    bulk_merge,
    bulk_split,
    similarity_limit_for_preset,
)
from destsim.energy import GroupCounts, LaneState, count_switching
from destsim.pipeline import run_words
from destsim.quality import psnr
from destsim.synth import correlated_words, synthetic_image
from destsim.table import DataTable
from destsim.trace import image_to_cache_lines, tensor_f32_to_cache_lines

from oracles import (
    brute_force_mse,
    dbi_expected_ones_per_byte,
    flat_charging_transitions,
    frame_stream_lane_groups,
)


def report(number: int, ok: bool, name: str, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    line = f"CRITERION {number:02d} {status}  {name}"
    if detail:
        line += f"  [{detail}]"
    print(line, flush=True)
    assert ok, line


def test_criterion_01_preset_mapping():
    mapping = {90: 7, 80: 13, 75: 16, 70: 20}
    got = {p: similarity_limit_for_preset(p) for p in mapping}
    report(1, got == mapping, "similarity presets map to exact bit limits", str(got))


def test_criterion_02_ohe_worst_case():
    ok = (
        ohe_encode(63) == 0x8000000000000000
        and (63).bit_count() == 6
        and ohe_encode(63).bit_count() == 1
    )
    report(2, ok, "one-hot index encoding of slot 63", "hamming 6 -> 1")


def test_criterion_03_exactness_suite():
    t0 = time.perf_counter()
    mismatches = 0
    # 10^6 uniform random chip words per scheme, streamed as cache lines
    rng = np.random.default_rng(2024)
    words = rng.integers(0, 1 << 64, size=(125_000, 8), dtype=np.uint64)
    for scheme in ("org", "dbi", "bde_org", "mbdc"):
        out = run_words(words, scheme, engine="fast")
        mismatches += int((out.decoded_words != words).sum())
    # 10^4 structured per-chip streams: repeats, near-duplicates, all-zeros
    sr = random.Random(7)
    for i in range(10_000):
        scheme = ("org", "dbi", "bde_org", "mbdc")[i % 4]
        enc, dec = make_codec_pair(scheme, capacity=sr.choice([1, 2, 8, 64]))
        kind = i % 3
        if kind == 0:
            stream = [sr.getrandbits(64)] * 12
        elif kind == 1:
            base = sr.getrandbits(64)
            stream = [base ^ sr.getrandbits(6) for _ in range(12)]
        else:
            stream = [0] * 6 + [sr.getrandbits(64), 0, sr.getrandbits(64)]
        for w in stream:
            if dec.step(enc.step(w)) != w:
                mismatches += 1
    dt = time.perf_counter() - t0
    report(3, mismatches == 0, "exact schemes: decode(encode) identity",
           f"4x10^6 random + 1.1x10^5 structured words, {mismatches} mismatches, {dt:.1f}s")


def test_criterion_04_table_synchrony():
    t0 = time.perf_counter()
    cfg = ApproxConfig.from_preset(80)
    diverged = 0
    for scheme, kwargs in [
        ("org", {}), ("dbi", {}), ("bde_org", {}), ("mbdc", {}),
        ("zacdest", dict(config=cfg)),
    ]:
        words = correlated_words(12_500, seed=hash(scheme) & 0xFFFF)  # 10^5 frames
        try:
            run_words(words, scheme, engine="scalar", sync_check=True, **kwargs)
        except Exception:
            diverged += 1
    dt = time.perf_counter() - t0
    report(4, diverged == 0, "sender/receiver tables bit-identical after every frame",
           f"10^5 frames x 5 schemes, {dt:.1f}s")


def test_criterion_05_mse_search_oracle():
    t0 = time.perf_counter()
    rng = random.Random(551)
    bad = 0
    for _ in range(10_000):
        entries = [rng.getrandbits(64) for _ in range(rng.randrange(0, 65))]
        t = DataTable(capacity=64)
        for e in entries:
            t.insert(e)
        query = rng.getrandbits(64)
        mask = rng.choice([0, build_mask("truncation", 8, 2), rng.getrandbits(64)])
        got = t.search(query, mask)
        want = brute_force_mse(entries, query, mask)
        if want is None:
            bad += got is not None
        elif (got.index, got.entry, got.xor_weight) != want:
            bad += 1
    dt = time.perf_counter() - t0
    report(5, bad == 0, "most-similar search matches brute force",
           f"10^4 instances, {bad} disagreements, {dt:.1f}s")


def test_criterion_06_zacdest_approximation_bound():
    t0 = time.perf_counter()
    violations = 0
    skip_counts = []
    for preset in (90, 80, 75, 70):
        for trunc_bits, tol_mode in [(0, "none"), (2, "quarter")]:
            cfg = ApproxConfig.from_preset(
                preset, value_width=8, trunc_bits_per_value=trunc_bits, tol_mode=tol_mode
            )
            limit = cfg.similarity_limit_bits
            trunc, tol = cfg.chip_masks()[0]
            keep = WORD_MASK & ~trunc
            words = correlated_words(12_500, seed=preset * 100 + trunc_bits)  # 10^5 words
            ohe_mask = np.zeros(words.shape, dtype=bool)

            def sink(line, chip, frame):
                if frame.frame_type == FrameType.OHE_SKIP:
                    ohe_mask[line, chip] = True

            out = run_words(words, "zacdest", config=cfg, frame_sink=sink)
            dec = out.decoded_words
            wp = words & np.uint64(keep)
            diff = dec ^ wp
            # truncated bits always zero in the reconstruction
            violations += int((dec & np.uint64(trunc)).any())
            # non-skip frames reconstruct exactly
            violations += int((diff[~ohe_mask] != 0).sum())
            # skips stay within the limit and never touch tolerance bits
            skip_diffs = diff[ohe_mask]
            violations += int((np.bitwise_count(skip_diffs & np.uint64(keep)) > limit).sum())
            violations += int((skip_diffs & np.uint64(tol) != 0).sum())
            skip_counts.append(int(ohe_mask.sum()))
    dt = time.perf_counter() - t0
    enough = min(skip_counts) >= 1000  # the bound must not pass vacuously
    report(6, violations == 0 and enough, "every skip within limit/tolerance/truncation contract",
           f"8 configs x 10^5 words, min skips/config {min(skip_counts)}, "
           f"{violations} violations, {dt:.1f}s")


def test_criterion_07_dbi_analytic_mean():
    t0 = time.perf_counter()
    expect = dbi_expected_ones_per_byte()
    assert expect == 744 / 256 + 93 / 256  # enumeration oracle vs closed split
    rng = np.random.default_rng(77)
    words = rng.integers(0, 1 << 64, size=(15_625, 8), dtype=np.uint64)  # 10^6 bytes
    out = run_words(words, "dbi", engine="fast")
    ones = out.counters.term.data + out.counters.term.flags
    mean = ones / 1_000_000
    dt = time.perf_counter() - t0
    ok = abs(mean - expect) <= 0.01
    reduction = (4.0 - expect) / 4.0 * 100
    report(7, ok, "bus-inversion mean transmitted ones per byte",
           f"measured {mean:.4f} vs {expect:.4f} +/- 0.01 ({reduction:.1f}% below 4.0), {dt:.1f}s")


def test_criterion_08_switching_oracle():
    t0 = time.perf_counter()
    rng = random.Random(88)
    bad = 0
    for _ in range(10_000):
        frames = []
        for _ in range(rng.randrange(1, 10)):
            kind = rng.randrange(4)
            from destsim.codec import Frame

            if kind == 0:
                frames.append(Frame(FrameType.ZERO, 0))
            elif kind == 1:
                frames.append(Frame(FrameType.OHE_SKIP, 1 << rng.randrange(64)))
            elif kind == 2:
                p, f = dbi_encode(rng.getrandbits(64))
                frames.append(Frame(FrameType.XOR_ENCODED, p, dbi_flags=f,
                                    index=rng.randrange(64)))
            else:
                p, f = dbi_encode(rng.getrandbits(64))
                frames.append(Frame(FrameType.RAW, p, dbi_flags=f))
        state = LaneState()
        got = GroupCounts()
        for f in frames:
            got.add(count_switching(state, f))
        data, index, flags, side = frame_stream_lane_groups(frames)
        want_data = flat_charging_transitions(data)
        want_index = flat_charging_transitions(index)
        want_flags = flat_charging_transitions(flags) + flat_charging_transitions(side)
        if (got.data, got.index, got.flags) != (want_data, want_index, want_flags):
            bad += 1
    dt = time.perf_counter() - t0
    report(8, bad == 0, "charging-transition counts match flat per-lane oracle",
           f"10^4 random streams, {bad} disagreements, {dt:.1f}s")


IMAGES = [synthetic_image(128, 192, seed) for seed in range(1, 9)]


def test_criterion_09_truncation_psnr():
    t0 = time.perf_counter()
    # closed form for k zeroed LSBs under a uniform residue: E[e^2] = sum j^2 / 16
    k = 4
    expect_db = 10 * math.log10(255**2 / (sum(j * j for j in range(1 << k)) / (1 << k)))
    assert round(expect_db, 1) == 29.2
    results = []
    for img in IMAGES:
        words = image_to_cache_lines(img).words()
        out = run_words(words, "mbdc",
                        config=ApproxConfig(value_width=8, trunc_bits_per_value=k))
        recon = np.frombuffer(bulk_merge(out.decoded_words), dtype=np.uint8)
        recon = recon[: img.size].reshape(img.shape)
        assert (recon & 0x0F).max() == 0
        results.append(psnr(img, recon))
    dt = time.perf_counter() - t0
    ok = all(abs(p - expect_db) <= 2.0 for p in results)
    report(9, ok, "4-bit truncation reconstruction lands in the analytic band",
           f"8 images, psnr {min(results):.2f}..{max(results):.2f} dB vs "
           f"{expect_db:.1f} +/- 2, {dt:.1f}s")


def test_criterion_10_directional_energy_ordering():
    t0 = time.perf_counter()
    cfg = ApproxConfig.from_preset(80)  # limit 13, trunc 0, tol none
    ok = True
    rows = []
    for img in IMAGES:
        words = image_to_cache_lines(img).words()
        term = {}
        for scheme, kwargs in [
            ("org", {}), ("bde_org", {}), ("mbdc", {}), ("zacdest", dict(config=cfg)),
        ]:
            term[scheme] = run_words(words, scheme, capacity=64, **kwargs).counters.term.total
        ordered = term["zacdest"] < term["mbdc"] < term["org"] and term["mbdc"] < term["bde_org"]
        ok &= ordered
        rows.append(term)
    dt = time.perf_counter() - t0
    mags = [
        f"zac/mbdc/bde/org {r['zacdest']}/{r['mbdc']}/{r['bde_org']}/{r['org']}" for r in rows[:2]
    ]
    report(10, ok, "termination ordering zacdest < mbdc < org and mbdc < bde_org on every image",
           f"8 images, e.g. {mags[0]}, {dt:.1f}s")


def test_criterion_11_zero_path():
    t0 = time.perf_counter()
    words = np.zeros((1000, 8), dtype=np.uint64)
    cfg = ApproxConfig.from_preset(90)
    # scalar engine exposes the encoder tables for the growth check
    from destsim.pipeline import _ScalarChannel

    ch = _ScalarChannel("zacdest", 64, cfg, "raw-only")
    out = ch.run(words, None, False)
    all_zero_frames = all(row == [0, 1000, 0, 0] for row in out.frame_counts)
    no_growth = all(enc.table.occupancy == 0 for enc, _ in ch.pairs)
    ok = (
        all_zero_frames
        and out.counters.term.data == 0
        and no_growth
        and not out.decoded_words.any()
    )
    dt = time.perf_counter() - t0
    report(11, ok, "all-zero trace: 100% ZERO frames, zero data ones, no table growth",
           f"8000 frames, {dt:.1f}s")


def test_criterion_12_float32_protection():
    t0 = time.perf_counter()
    rng = np.random.default_rng(12)
    # random weights with block reuse: repeating 16-value lines whose
    # mantissas jitter, so similar chip words recur and skips fire
    pattern = np.tile(rng.standard_normal(16).astype(np.float32), 2500)
    jitter = (rng.integers(0, 1 << 5, size=40_000, dtype=np.uint32) << np.uint32(8))
    tensor = (pattern.view(np.uint32) ^ jitter).view(np.float32)
    stream = tensor_f32_to_cache_lines(tensor)
    cfg = ApproxConfig(
        similarity_limit_bits=13, value_width=32, trunc_bits_per_value=8, tol_mode="float32"
    )
    skips = [0]

    def sink(line, chip, frame):
        if frame.frame_type == FrameType.OHE_SKIP:
            skips[0] += 1

    out = run_words(stream.words(), "zacdest", config=cfg, frame_sink=sink)
    recon = np.frombuffer(bulk_merge(out.decoded_words), dtype="<f4")[: tensor.size]
    orig_bits = tensor.view(np.uint32)
    recon_bits = recon.view(np.uint32)
    bad = int((orig_bits >> np.uint32(23) != recon_bits >> np.uint32(23)).sum())
    dt = time.perf_counter() - t0
    ok = bad == 0 and skips[0] > 100
    report(12, ok, "sign and exponent bit-identical for every float under skipping",
           f"40000 values, {skips[0]} skips, {bad} violations, {dt:.1f}s")


def test_criterion_13_throughput():
    n = 1_000_000
    rng = np.random.default_rng(13)
    raw = rng.integers(0, 256, size=n * 64, dtype=np.uint8)
    # overwrite stretches with repeats so the stream shows realistic reuse
    block = rng.integers(0, 256, size=64, dtype=np.uint8)
    raw[: n * 16].reshape(-1, 64)[:] = block
    data = raw.tobytes()
    cfg = ApproxConfig.from_preset(80)
    t0 = time.perf_counter()
    words = bulk_split(data)
    out = run_words(words, "zacdest", config=cfg, engine="fast")
    decoded = bulk_merge(out.decoded_words)
    dt = time.perf_counter() - t0
    ok = dt < 60.0 and len(decoded) == len(data)
    report(13, ok, "10^6 cache lines through the full skip-transfer pipeline",
           f"{dt:.1f}s single-threaded ({n / dt / 1e6:.2f}M lines/s x 8 chips)")
