"""Whole-channel simulation: 8 per-chip codecs in lockstep over a line stream.

Two interchangeable engines produce bit-identical results:

* ``scalar`` wires one :mod:`destsim.codec` encoder/decoder pair and one
  lane-state tracker per chip -- the readable reference.
* ``fast`` batches the expensive most-similar-entry search across all 8
  chips as one numpy xor/popcount/argmin over the (8, capacity) table
  bank, keeps plain-int mirrors of the slots for the branchy per-chip
  logic, and counts energy with branch-free bit tricks.  Unoccupied slots
  carry a +100 weight penalty so they can never win the argmin against a
  real entry (real weights are <= 64).  The tableless schemes (org, dbi)
  vectorize over whole chunks.

The fast engine exists purely for throughput; tests pin it against the
scalar engine frame by frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .codec import (
    _DBI_EXPAND,
    DesyncError,
    Frame,
    FrameType,
    dbi_encode,
    make_codec_pair,
    ohe_decode,
)
from .core import ApproxConfig, CHIPS_PER_LINE, WORD_MASK
from .energy import EnergyCounters, EnergyParams, GroupCounts, LaneState, to_joules

_LOW64 = (1 << 64) - 1
_LOW56 = (1 << 56) - 1
_SB_ONES = [int(t).bit_count() for t in range(4)]
_CHUNK_LINES = 4096
_MAX_CAPACITY = 64  # 6-bit binary index / one-hot over 64 data lines

# numpy mirrors of the SWAR DBI constants (wraparound is carry-safe: no two
# byte-gather terms collide modulo 64)
_N55 = np.uint64(0x5555555555555555)
_N33 = np.uint64(0x3333333333333333)
_N0F = np.uint64(0x0F0F0F0F0F0F0F0F)
_N0B = np.uint64(0x0B0B0B0B0B0B0B0B)
_N10 = np.uint64(0x1010101010101010)
_NGATHER = np.uint64(0x0102040810204080)
_NFF = np.uint64(0xFF)
_N1 = np.uint64(1)
_N2 = np.uint64(2)
_N4 = np.uint64(4)
_N8 = np.uint64(8)
_N56 = np.uint64(56)
_NLOW56 = np.uint64(_LOW56)
_DBI_EXPAND_NP = np.array(_DBI_EXPAND, dtype=np.uint64)
_ZEROS8 = [0] * CHIPS_PER_LINE
# python-int SWAR constants for the inlined hot loop
_M_INTS = (
    0x5555555555555555,
    0x3333333333333333,
    0x0F0F0F0F0F0F0F0F,
    0x0B0B0B0B0B0B0B0B,
    0x1010101010101010,
    0x0102040810204080,
)

FrameSink = Callable[[int, int, Frame], None]


@dataclass
class StreamOutcome:
    """Everything one simulated stream produces besides the decoded data."""

    scheme: str
    counters: EnergyCounters
    frame_counts: list[list[int]]  # [chip][FrameType] occurrence counts
    decoded_words: np.ndarray  # (n_lines, 8) uint64
    n_lines: int

    @property
    def n_frames(self) -> int:
        return sum(sum(row) for row in self.frame_counts)

    def report(self, params: EnergyParams | None = None):
        return to_joules(self.counters, params or EnergyParams())


def run_words(
    words: np.ndarray,
    scheme: str,
    *,
    capacity: int = 64,
    config: ApproxConfig | None = None,
    update_policy: str = "raw-only",
    engine: str = "fast",
    frame_sink: FrameSink | None = None,
    sync_check: bool = False,
) -> StreamOutcome:
    """Push a (n_lines, 8) chip-word array through encode/energy/decode."""
    words = np.ascontiguousarray(words, dtype=np.uint64)
    if words.ndim != 2 or words.shape[1] != CHIPS_PER_LINE:
        raise ValueError("words must be a (n_lines, 8) array")
    if not 1 <= capacity <= _MAX_CAPACITY:
        raise ValueError(f"capacity must be in [1, {_MAX_CAPACITY}]")
    if engine == "scalar":
        ch = _ScalarChannel(scheme, capacity, config, update_policy)
    elif engine == "fast":
        ch = _FastChannel(scheme, capacity, config, update_policy)
    else:
        raise ValueError(f"engine must be 'fast' or 'scalar', got {engine!r}")
    return ch.run(words, frame_sink, sync_check)


def _chip_masks(scheme: str, config: ApproxConfig | None) -> list[tuple[int, int]]:
    if scheme in ("mbdc", "zacdest") and config is not None:
        return config.chip_masks()
    return [(0, 0)] * CHIPS_PER_LINE


class _ScalarChannel:
    def __init__(self, scheme, capacity, config, update_policy):
        if scheme == "zacdest" and config is None:
            raise ValueError("zacdest requires an ApproxConfig")
        self.scheme = scheme
        masks = _chip_masks(scheme, config)
        self.pairs = [
            make_codec_pair(
                scheme,
                capacity=capacity,
                config=config,
                trunc_mask=trunc,
                tol_mask=tol,
                update_policy=update_policy,
            )
            for trunc, tol in masks
        ]
        self.lanes = [LaneState() for _ in range(CHIPS_PER_LINE)]
        self.counters = EnergyCounters()
        self.frame_counts = [[0] * 4 for _ in range(CHIPS_PER_LINE)]

    def run(self, words, frame_sink, sync_check):
        n = words.shape[0]
        decoded = np.zeros_like(words)
        for i in range(n):
            row = words[i].tolist()
            out = []
            for c in range(CHIPS_PER_LINE):
                enc, dec = self.pairs[c]
                frame = enc.step(row[c])
                self.counters.record(frame, self.lanes[c])
                self.frame_counts[c][int(frame.frame_type)] += 1
                out.append(dec.step(frame))
                if frame_sink is not None:
                    frame_sink(i, c, frame)
                if sync_check and hasattr(enc, "table") and enc.table != dec.table:
                    raise DesyncError(f"table divergence at line {i} chip {c}")
            decoded[i] = out
        return StreamOutcome(self.scheme, self.counters, self.frame_counts, decoded, n)


class _FastChannel:
    def __init__(self, scheme, capacity, config, update_policy):
        if scheme == "zacdest" and config is None:
            raise ValueError("zacdest requires an ApproxConfig")
        self.scheme = scheme
        self.capacity = capacity
        self.update_policy = update_policy
        masks = _chip_masks(scheme, config)
        self.trunc = [m[0] for m in masks]
        self.tol = [m[1] for m in masks]
        self.keep = [WORD_MASK & ~m[0] for m in masks]
        self.limit = config.similarity_limit_bits if config else 0
        self.skip_allowed = scheme == "zacdest" and config is not None and config.approx_allowed
        self.dedupe = scheme in ("mbdc", "zacdest")
        self.uses_table = scheme in ("bde_org", "mbdc", "zacdest")

        nchips = CHIPS_PER_LINE
        if self.uses_table:
            self.enc_bank = np.zeros((nchips, capacity), dtype=np.uint64)
            self.enc_penalty = np.full((nchips, capacity), 100, dtype=np.uint8)
            self.enc_slots: list[list[int]] = [[] for _ in range(nchips)]
            self.enc_head = [0] * nchips
            self.enc_present: list[set[int]] = [set() for _ in range(nchips)]
            self.dec_slots: list[list[int]] = [[] for _ in range(nchips)]
            self.dec_head = [0] * nchips
            self.dec_present: list[set[int]] = [set() for _ in range(nchips)]
        self.lane_data = [0] * nchips
        self.lane_index = [0] * nchips
        self.lane_flags = [0] * nchips
        self.lane_sb = [0] * nchips
        self.term = GroupCounts()
        self.switch = GroupCounts()
        self.frames = 0
        self.frame_counts = [[0] * 4 for _ in range(nchips)]
        self._arange = np.arange(nchips)

    # -- table maintenance: numpy bank for search + plain-int mirrors ----------

    def _enc_insert(self, c: int, v: int) -> None:
        if self.dedupe and v in self.enc_present[c]:
            return
        slots = self.enc_slots[c]
        if len(slots) < self.capacity:
            slot = len(slots)
            slots.append(v)
            self.enc_penalty[c, slot] = 0
        else:
            slot = self.enc_head[c]
            self.enc_head[c] = (slot + 1) % self.capacity
            self.enc_present[c].discard(slots[slot])
            slots[slot] = v
        self.enc_bank[c, slot] = v
        if self.dedupe:
            self.enc_present[c].add(v)

    def _dec_insert(self, c: int, v: int) -> None:
        if self.dedupe and v in self.dec_present[c]:
            return
        slots = self.dec_slots[c]
        if len(slots) < self.capacity:
            slots.append(v)
        else:
            slot = self.dec_head[c]
            self.dec_head[c] = (slot + 1) % self.capacity
            self.dec_present[c].discard(slots[slot])
            slots[slot] = v
        if self.dedupe:
            self.dec_present[c].add(v)

    def run(self, words, frame_sink, sync_check):
        if self.uses_table:
            return self._run_table(words, frame_sink, sync_check)
        if frame_sink is None and not sync_check:
            return self._run_plain_vectorized(words)
        return self._run_plain(words, frame_sink)

    # -- org / dbi: whole-chunk vectorization -----------------------------------

    def _run_plain_vectorized(self, words):
        n = words.shape[0]
        decoded = np.empty_like(words)
        # chunked so long streams never hold whole-stream temporaries; the
        # lane state carries between chunks
        for start in range(0, n, 16 * _CHUNK_LINES):
            stop = min(start + 16 * _CHUNK_LINES, n)
            self._plain_chunk(words[start:stop], decoded[start:stop])
        self.frames += n * CHIPS_PER_LINE
        for c in range(CHIPS_PER_LINE):
            self.frame_counts[c][0] += n  # every frame is RAW
        return self._outcome(decoded, n)

    def _plain_chunk(self, words, decoded_out):
        n = words.shape[0]
        if n == 0:
            return
        if self.scheme == "dbi":
            x = words - ((words >> _N1) & _N55)
            x = (x & _N33) + ((x >> _N2) & _N33)
            x = (x + (x >> _N4)) & _N0F
            m = ((x + _N0B) & _N10) >> _N4
            payload = words ^ (m * _NFF)
            flags = (m * _NGATHER) >> _N56
            decoded_out[:] = payload ^ _DBI_EXPAND_NP[flags.astype(np.intp)]
            self.term.flags += int(np.bitwise_count(flags).sum())
            prev_f = np.empty_like(flags)
            prev_f[0] = np.array(self.lane_flags, dtype=np.uint64)
            prev_f[1:] = flags[:-1]
            self.switch.flags += int(np.bitwise_count(prev_f & ~flags).sum())
            self.lane_flags = flags[-1].tolist()
        else:
            payload = words
            decoded_out[:] = words

        self.term.data += int(np.bitwise_count(payload).sum())
        # within-word 1->0 steps plus the boundary from each previous top byte
        within = payload & ~(payload >> _N8) & _NLOW56
        self.switch.data += int(np.bitwise_count(within).sum())
        prev_top = np.empty_like(payload)
        prev_top[0] = np.array(self.lane_data, dtype=np.uint64)
        np.right_shift(payload[:-1], _N56, out=prev_top[1:])
        boundary = prev_top & ~payload & _NFF
        self.switch.data += int(np.bitwise_count(boundary).sum())
        self.lane_data = (payload[-1] >> _N56).tolist()

    def _run_plain(self, words, frame_sink):
        n = words.shape[0]
        decoded = np.zeros_like(words)
        with_dbi = self.scheme == "dbi"
        for i in range(n):
            row = words[i].tolist()
            out = []
            for c in range(CHIPS_PER_LINE):
                w = row[c]
                payload, flags = dbi_encode(w) if with_dbi else (w, 0)
                self._record_one(c, 0, payload, flags, 0)
                if frame_sink is not None:
                    frame_sink(i, c, Frame(FrameType.RAW, payload, dbi_flags=flags))
                out.append(payload ^ _DBI_EXPAND[flags] if with_dbi else payload)
            decoded[i] = out
        return self._outcome(decoded, n)

    def _record_one(self, c, ftype, payload, flags, idx_bits):
        self.term.data += payload.bit_count()
        self.term.index += idx_bits.bit_count()
        self.term.flags += flags.bit_count() + _SB_ONES[ftype]
        seq = self.lane_data[c] | (payload << 8)
        self.switch.data += (seq & ~(seq >> 8) & _LOW64).bit_count()
        self.lane_data[c] = payload >> 56
        iseq = self.lane_index[c] | (idx_bits << 1)
        self.switch.index += (iseq & ~(iseq >> 1) & 0xFF).bit_count()
        self.lane_index[c] = (iseq >> 8) & 1
        self.switch.flags += (self.lane_flags[c] & ~flags).bit_count()
        self.lane_flags[c] = flags
        self.switch.flags += (self.lane_sb[c] & ~ftype).bit_count()
        self.lane_sb[c] = ftype
        self.frames += 1
        self.frame_counts[c][ftype] += 1

    # -- table-backed schemes: hot loop, deliberately inlined --------------------

    def _run_table(self, words, frame_sink, sync_check):
        n = words.shape[0]
        decoded = np.zeros_like(words)
        is_bde = self.scheme == "bde_org"
        every_access = self.update_policy == "every-access"
        skip_allowed = self.skip_allowed
        limit = self.limit
        keep = self.keep
        tol = self.tol
        bank = self.enc_bank
        penalty = self.enc_penalty
        enc_slots = self.enc_slots
        dec_slots = self.dec_slots
        lane_data = self.lane_data
        lane_index = self.lane_index
        lane_flags = self.lane_flags
        lane_sb = self.lane_sb
        frame_counts = self.frame_counts
        enc_insert = self._enc_insert
        dec_insert = self._dec_insert
        expand = _DBI_EXPAND
        sb_ones = _SB_ONES
        arange = self._arange
        chips = range(CHIPS_PER_LINE)
        emit = frame_sink is not None

        term_data = term_index = term_flags = 0
        sw_data = sw_index = sw_flags = 0

        qcol = np.empty((CHIPS_PER_LINE, 1), dtype=np.uint64)
        xbuf = np.empty_like(bank)
        cntbuf = np.empty(bank.shape, dtype=np.uint8)

        # SWAR DBI constants (python ints: payloads here are plain ints)
        m55, m33, m0f, m0b, m10, gather = _M_INTS

        for start in range(0, n, _CHUNK_LINES):
            stop = min(start + _CHUNK_LINES, n)
            chunk = words[start:stop].tolist()
            out_rows = []
            for off, row in enumerate(chunk):
                q = [row[c] & keep[c] for c in chips]
                if is_bde or any(q):
                    qcol[:, 0] = q
                    np.bitwise_xor(bank, qcol, out=xbuf)
                    np.bitwise_count(xbuf, out=cntbuf)
                    cntbuf += penalty
                    best = cntbuf.argmin(axis=1)
                    best_w = cntbuf[arange, best]
                    idx_list = best.tolist()
                    w_list = best_w.tolist()
                else:
                    idx_list = w_list = _ZEROS8  # all chips take the ZERO path

                out = []
                for c in chips:
                    wp = q[c]
                    slots = enc_slots[c]
                    mse_i = idx_list[c]

                    # ---- encode ----
                    if is_bde:
                        if slots and wp.bit_count() > w_list[c]:
                            ftype = 3
                            payload = wp ^ slots[mse_i]
                            flags = 0
                            idx_bits = mse_i
                            if every_access:
                                enc_insert(c, wp)
                        else:
                            ftype, payload, flags, idx_bits = 0, wp, 0, 0
                            enc_insert(c, wp)
                    elif wp == 0:
                        ftype, payload, flags, idx_bits = 1, 0, 0, 0
                    elif (
                        skip_allowed
                        and slots
                        and w_list[c] <= limit
                        and ((wp ^ slots[mse_i]) & tol[c]) == 0
                    ):
                        ftype, payload, flags, idx_bits = 2, 1 << mse_i, 0, 0
                    else:
                        if slots and wp.bit_count() > w_list[c] + mse_i.bit_count():
                            pre = wp ^ slots[mse_i]
                            idx_bits = mse_i
                            ftype = 3
                        else:
                            pre = wp
                            idx_bits = 0
                            ftype = 0
                        # inline dbi_encode
                        x = pre - ((pre >> 1) & m55)
                        x = (x & m33) + ((x >> 2) & m33)
                        x = (x + (x >> 4)) & m0f
                        mbyte = ((x + m0b) & m10) >> 4
                        payload = pre ^ (mbyte * 0xFF)
                        flags = ((mbyte * gather) >> 56) & 0xFF
                        enc_insert(c, wp)

                    # ---- energy ----
                    term_data += payload.bit_count()
                    term_index += idx_bits.bit_count()
                    term_flags += flags.bit_count() + sb_ones[ftype]
                    seq = lane_data[c] | (payload << 8)
                    sw_data += (seq & ~(seq >> 8) & _LOW64).bit_count()
                    lane_data[c] = payload >> 56
                    iseq = lane_index[c] | (idx_bits << 1)
                    sw_index += (iseq & ~(iseq >> 1) & 0xFF).bit_count()
                    lane_index[c] = (iseq >> 8) & 1
                    sw_flags += (lane_flags[c] & ~flags).bit_count()
                    lane_flags[c] = flags
                    sw_flags += (lane_sb[c] & ~ftype).bit_count()
                    lane_sb[c] = ftype
                    frame_counts[c][ftype] += 1

                    # ---- decode (mirror) ----
                    dslots = dec_slots[c]
                    if ftype == 1:
                        dw = 0
                    elif ftype == 2:
                        slot = ohe_decode(payload)
                        if slot >= len(dslots):
                            raise DesyncError(f"one-hot slot {slot} beyond occupancy")
                        dw = dslots[slot] & keep[c]
                    elif is_bde:
                        if ftype == 3:
                            if idx_bits >= len(dslots):
                                raise DesyncError(f"index {idx_bits} beyond occupancy")
                            dw = payload ^ dslots[idx_bits]
                            if every_access:
                                dec_insert(c, dw)
                        else:
                            dw = payload
                            dec_insert(c, dw)
                    else:
                        pre = payload ^ expand[flags]
                        if ftype == 3:
                            if idx_bits >= len(dslots):
                                raise DesyncError(f"index {idx_bits} beyond occupancy")
                            dw = pre ^ (dslots[idx_bits] & keep[c])
                        else:
                            dw = pre
                        dec_insert(c, dw)
                    out.append(dw)

                    if emit:
                        idx = idx_bits if ftype == 3 else None
                        frame_sink(
                            start + off, c,
                            Frame(FrameType(ftype), payload, dbi_flags=flags, index=idx),
                        )
                out_rows.append(out)
                if sync_check:
                    self._check_sync(start + off)
            decoded[start:stop] = out_rows

        self.term.data += term_data
        self.term.index += term_index
        self.term.flags += term_flags
        self.switch.data += sw_data
        self.switch.index += sw_index
        self.switch.flags += sw_flags
        self.frames += n * CHIPS_PER_LINE
        return self._outcome(decoded, n)

    def _check_sync(self, line_no):
        for c in range(CHIPS_PER_LINE):
            if self.enc_slots[c] != self.dec_slots[c] or self.enc_head[c] != self.dec_head[c]:
                raise DesyncError(f"table divergence at line {line_no} chip {c}")

    def _outcome(self, decoded, n):
        counters = EnergyCounters(term=self.term, switch=self.switch, frames=self.frames)
        return StreamOutcome(self.scheme, counters, self.frame_counts, decoded, n)


@dataclass
class SimResult:
    """Outcome of simulating one trace stream under one scheme."""

    outcome: StreamOutcome
    decoded_bytes: bytes
    params: EnergyParams = field(default_factory=EnergyParams)

    def report(self):
        return to_joules(self.outcome.counters, self.params)


def effective_config(config: ApproxConfig | None, meta) -> ApproxConfig | None:
    """Resolve the per-stream configuration.

    The stream's own approx_allowed flag can only forbid approximation,
    never enable it.  float32 tensor streams automatically trade generic
    chunk masks for the sign/exponent-protecting ones (total truncation
    bit budget preserved, capped at the mantissa).
    """
    if config is None:
        return None
    allowed = config.approx_allowed and meta.approx_allowed
    if meta.kind == "tensor_f32" and config.tol_mode != "float32":
        total_trunc = 64 * config.trunc_bits_per_value // config.value_width
        per_value = min(total_trunc // 2, 23)  # 16 values/line -> 32-bit chunks
        return ApproxConfig(
            similarity_limit_bits=config.similarity_limit_bits,
            value_width=32,
            trunc_bits_per_value=per_value,
            tol_mode="float32",
            approx_allowed=allowed,
        )
    if allowed != config.approx_allowed:
        return ApproxConfig(
            similarity_limit_bits=config.similarity_limit_bits,
            value_width=config.value_width,
            trunc_bits_per_value=config.trunc_bits_per_value,
            tol_mode=config.tol_mode,
            approx_allowed=allowed,
        )
    return config


def simulate_stream(
    stream,
    scheme: str,
    *,
    capacity: int = 64,
    config: ApproxConfig | None = None,
    params: EnergyParams | None = None,
    update_policy: str = "raw-only",
    engine: str = "fast",
    frame_sink: FrameSink | None = None,
) -> SimResult:
    """Encode, account, decode and re-merge one trace stream."""
    from .core import bulk_merge
    from .trace import TraceStream

    if not isinstance(stream, TraceStream):
        raise TypeError("simulate_stream expects a TraceStream")
    if config is not None and config.tol_mode == "float32" and stream.meta.kind != "tensor_f32":
        raise ValueError("float32 tolerance configured for a non-tensor stream")
    outcome = run_words(
        stream.words(),
        scheme,
        capacity=capacity,
        config=effective_config(config, stream.meta),
        update_policy=update_policy,
        engine=engine,
        frame_sink=frame_sink,
    )
    return SimResult(outcome, bulk_merge(outcome.decoded_words), params or EnergyParams())
