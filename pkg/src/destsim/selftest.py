"""Built-in consistency checks for `destsim selftest`.

Each check re-derives its expectation with a naive local oracle so a
broken build cannot vouch for itself.  One PASS/FAIL line per check;
exit status 3 on any failure.
"""

from __future__ import annotations

import random

import numpy as np

from .codec import dbi_encode, ohe_encode
from .core import ApproxConfig, merge_chip_words, split_cache_line
from .energy import LaneState
from .pipeline import run_words
from .synth import correlated_words

EXIT_INTERNAL = 3


def _check_split_merge(rng) -> str | None:
    for _ in range(200):
        line = bytes(rng.randrange(256) for _ in range(64))
        words = split_cache_line(line)
        if merge_chip_words(words) != line:
            return "merge(split(line)) != line"
        for j, byte in enumerate(line):
            if (words[j % 8] >> (8 * (j // 8))) & 0xFF != byte:
                return f"byte {j} landed in the wrong chip/burst"
    return None


def _check_dbi(rng) -> str | None:
    total = 0
    n = 50_000
    for _ in range(n):
        w = rng.getrandbits(64)
        payload, flags = dbi_encode(w)
        for b in range(8):
            byte = (w >> (8 * b)) & 0xFF
            enc = (payload >> (8 * b)) & 0xFF
            flagged = (flags >> b) & 1
            if bin(byte).count("1") > 4:
                if enc != byte ^ 0xFF or not flagged:
                    return f"heavy byte 0x{byte:02x} not inverted"
            elif enc != byte or flagged:
                return f"light byte 0x{byte:02x} altered"
        total += payload.bit_count() + flags.bit_count()
    mean = total / (8 * n)
    if abs(mean - 837 / 256) > 0.02:
        return f"mean transmitted ones per byte {mean:.4f} != 3.2695"
    return None


def _check_table_search(rng) -> str | None:
    from .table import DataTable

    for _ in range(500):
        entries = [rng.getrandbits(64) for _ in range(rng.randrange(0, 20))]
        t = DataTable(capacity=32)
        for e in entries:
            t.insert(e)
        q = rng.getrandbits(64)
        got = t.search(q)
        if not entries:
            if got is not None:
                return "empty table returned a result"
            continue
        weights = [bin(e ^ q).count("1") for e in entries]
        w = min(weights)
        i = weights.index(w)
        if (got.index, got.xor_weight) != (i, w):
            return f"search returned ({got.index}, {got.xor_weight}), oracle ({i}, {w})"
    return None


def _check_exactness(rng) -> str | None:
    words = correlated_words(200, seed=rng.randrange(1 << 30))
    for scheme in ("org", "dbi", "bde_org", "mbdc"):
        out = run_words(words, scheme, sync_check=True)
        if not np.array_equal(out.decoded_words, words):
            return f"{scheme} failed to reconstruct exactly"
    return None


def _check_skip_bound(rng) -> str | None:
    cfg = ApproxConfig.from_preset(80)
    words = correlated_words(400, seed=rng.randrange(1 << 30))
    out = run_words(words, "zacdest", config=cfg, sync_check=True)
    diffs = np.bitwise_count(out.decoded_words ^ words)
    if int(diffs.max()) > 13:
        return f"a skip strayed {int(diffs.max())} bits from the original"
    if not (out.decoded_words != words).any():
        return "no skips happened on a correlated stream"
    return None


def _check_switching(rng) -> str | None:
    from .codec import Frame, FrameType
    from .energy import count_switching

    state = LaneState()
    payloads = [rng.getrandbits(64) for _ in range(64)]
    got = 0
    for p in payloads:
        got += count_switching(state, Frame(FrameType.RAW, p)).data
    want = 0
    for lane in range(8):
        prev = 0
        for p in payloads:
            for burst in range(8):
                bit = (p >> (burst * 8 + lane)) & 1
                if prev == 1 and bit == 0:
                    want += 1
                prev = bit
    if got != want:
        return f"switching count {got} != flat oracle {want}"
    return None


def _check_ohe() -> str | None:
    if ohe_encode(63) != 0x8000000000000000:
        return "one-hot encoding of slot 63 is wrong"
    if ohe_encode(63).bit_count() != 1 or (63).bit_count() != 6:
        return "one-hot weight reduction broken"
    return None


def _check_zero_path() -> str | None:
    words = np.zeros((50, 8), dtype=np.uint64)
    cfg = ApproxConfig.from_preset(90)
    out = run_words(words, "zacdest", config=cfg)
    if out.counters.term.data != 0:
        return "all-zero trace transmitted data ones"
    if any(row[1] != 50 for row in out.frame_counts):
        return "all-zero trace produced non-ZERO frames"
    return None


CHECKS = [
    ("cache-line split/merge layout", _check_split_merge, True),
    ("bus-inversion rule and analytic mean", _check_dbi, True),
    ("table search vs linear-scan oracle", _check_table_search, True),
    ("exact schemes round-trip", _check_exactness, True),
    ("skip-transfer approximation bound", _check_skip_bound, True),
    ("charging-transition count vs flat oracle", _check_switching, True),
    ("one-hot index encoding", _check_ohe, False),
    ("all-zero stream handling", _check_zero_path, False),
]


def run(seed: int = 0) -> int:
    rng = random.Random(seed)
    failures = 0
    for name, fn, needs_rng in CHECKS:
        problem = fn(rng) if needs_rng else fn()
        status = "PASS" if problem is None else "FAIL"
        line = f"{status}  {name}"
        if problem:
            line += f": {problem}"
            failures += 1
        print(line)
    print(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return 0 if failures == 0 else EXIT_INTERNAL
