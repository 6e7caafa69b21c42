"""Per-chip encoder/decoder state machines for the five bus-encoding schemes.

Schemes (CLI names in parentheses):

* ORG (``org``) -- unencoded baseline; words pass through untouched.
* DBI (``dbi``) -- per-burst-byte bus inversion: any byte with more than
  four 1s is inverted and its flag bit set, capping every transmitted
  byte at four 1s.
* BDE_ORG (``bde_org``) -- original bitwise-difference coder: XOR the
  outgoing word with the most similar recent entry when that lowers the
  hamming weight; the table is updated only on the raw branch (an
  ``every-access`` update policy is also available).  No DBI, no
  truncation, duplicate entries allowed.
* MBDC (``mbdc``) -- modified difference coder: all-zero words get a
  dedicated ZERO frame and never touch the table, the encode condition
  charges the index's hamming weight, the table is duplicate-free, and
  DBI is applied to the final payload.
* ZAC-DEST (``zacdest``) -- MBDC plus transfer skipping: when the most
  similar entry is within the similarity limit and matches on every
  tolerance bit, only its one-hot-encoded slot index is sent over the
  (otherwise idle) data lines and the receiver substitutes its own copy.

Every encoder has a mirrored decoder that replays table updates from the
frame stream alone, so sender and receiver tables stay bit-identical
without any side channel.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

from .core import ApproxConfig, WORD_MASK
from .table import DataTable, MseResult


class CodecError(Exception):
    """Base class for frame/stream decoding failures."""


class MalformedFrameError(CodecError):
    """Frame contents violate the wire contract (e.g. bad one-hot payload)."""


class DesyncError(CodecError):
    """Decoder table state cannot satisfy the received frame; fatal."""


class FrameType(IntEnum):
    """2-bit frame-type sideband code.

    RAW is 0 so the unencoded baseline spends nothing on the sideband
    lines; ZERO deliberately costs a single 1.
    """

    RAW = 0
    ZERO = 1
    OHE_SKIP = 2
    XOR_ENCODED = 3


@dataclass(frozen=True)
class Frame:
    """One chip's physical emission for one chip word.

    ``payload`` is what the 8 data lanes carry (post-DBI where the scheme
    applies it), ``dbi_flags`` has one bit per burst, ``index`` is the
    6-bit binary slot index on the per-chip index line (None = idle).
    """

    frame_type: FrameType
    payload: int
    dbi_flags: int = 0
    index: int | None = None

    @property
    def sideband(self) -> int:
        return int(self.frame_type)


# --- DBI -------------------------------------------------------------------

_M55 = 0x5555555555555555
_M33 = 0x3333333333333333
_M0F = 0x0F0F0F0F0F0F0F0F
_M0B = 0x0B0B0B0B0B0B0B0B
_M10 = 0x1010101010101010
_GATHER = 0x0102040810204080

#: flags byte -> 64-bit inversion mask applied to the payload
_DBI_EXPAND = [
    int.from_bytes(bytes(0xFF if (f >> b) & 1 else 0 for b in range(8)), "little")
    for f in range(256)
]


def dbi_encode(w: int) -> tuple[int, int]:
    """Invert every burst byte carrying more than four 1s.

    Returns ``(payload, flags)`` where flag bit b marks burst b inverted.
    Uses a branch-free SWAR per-byte popcount; adding 11 to a byte count
    sets bit 4 exactly when the count exceeds 4.
    """
    x = w - ((w >> 1) & _M55)
    x = (x & _M33) + ((x >> 2) & _M33)
    x = (x + (x >> 4)) & _M0F
    m = ((x + _M0B) & _M10) >> 4  # 0x01 in every byte with popcount > 4
    payload = w ^ (m * 0xFF)
    flags = ((m * _GATHER) >> 56) & 0xFF
    return payload, flags


def dbi_decode(payload: int, flags: int) -> int:
    """Re-invert flagged bytes; exact inverse of :func:`dbi_encode`."""
    return payload ^ _DBI_EXPAND[flags & 0xFF]


# --- one-hot index encoding -------------------------------------------------


def ohe_encode(slot: int) -> int:
    """One-hot encode a table slot index onto the 64 data lines."""
    if not 0 <= slot <= 63:
        raise ValueError(f"slot must be in [0, 63], got {slot}")
    return 1 << slot


def ohe_decode(w: int) -> int:
    """Recover the slot index from a one-hot word."""
    if w.bit_count() != 1:
        raise MalformedFrameError(f"one-hot payload must have exactly one set bit: 0x{w:016x}")
    return w.bit_length() - 1


# --- ORG / DBI passthrough codecs -------------------------------------------


class OrgEncoder:
    scheme = "org"

    def step(self, w: int) -> Frame:
        return Frame(FrameType.RAW, w)


class OrgDecoder:
    def step(self, f: Frame) -> int:
        return f.payload


class DbiEncoder:
    scheme = "dbi"

    def step(self, w: int) -> Frame:
        payload, flags = dbi_encode(w)
        return Frame(FrameType.RAW, payload, dbi_flags=flags)


class DbiDecoder:
    def step(self, f: Frame) -> int:
        return dbi_decode(f.payload, f.dbi_flags)


# --- original bitwise-difference coder ---------------------------------------

UPDATE_POLICIES = ("raw-only", "every-access")


class BdeOrgEncoder:
    """Encode condition: popcount(word) > popcount(word XOR most-similar).

    ``update_policy='raw-only'`` inserts into the table only when the raw
    word is sent; ``'every-access'`` inserts on both branches.
    """

    scheme = "bde_org"

    def __init__(self, capacity: int = 64, update_policy: str = "raw-only"):
        if update_policy not in UPDATE_POLICIES:
            raise ValueError(f"update_policy must be one of {UPDATE_POLICIES}")
        self.table = DataTable(capacity, dedupe=False)
        self.update_policy = update_policy

    def step(self, w: int) -> Frame:
        m = self.table.search(w)
        if m is not None and w.bit_count() > m.xor_weight:
            if self.update_policy == "every-access":
                self.table.insert(w)
            return Frame(FrameType.XOR_ENCODED, w ^ m.entry, index=m.index)
        self.table.insert(w)
        return Frame(FrameType.RAW, w)


class BdeOrgDecoder:
    def __init__(self, capacity: int = 64, update_policy: str = "raw-only"):
        if update_policy not in UPDATE_POLICIES:
            raise ValueError(f"update_policy must be one of {UPDATE_POLICIES}")
        self.table = DataTable(capacity, dedupe=False)
        self.update_policy = update_policy

    def step(self, f: Frame) -> int:
        if f.frame_type == FrameType.XOR_ENCODED:
            if f.index is None or f.index >= self.table.occupancy:
                raise DesyncError(f"index {f.index} beyond occupancy {self.table.occupancy}")
            w = f.payload ^ self.table.entry_at(f.index)
            if self.update_policy == "every-access":
                self.table.insert(w)
            return w
        if f.frame_type == FrameType.RAW:
            self.table.insert(f.payload)
            return f.payload
        raise MalformedFrameError(f"unexpected frame type {f.frame_type.name} for bde_org")


# --- modified difference coder (zero-aware, dedupe, DBI) ---------------------


class MbdcEncoder:
    """Zero-aware difference coder over a duplicate-free table.

    The word is truncated first; an all-zero result gets a ZERO frame and
    leaves the table alone.  Otherwise the word is XOR-encoded only when
    that wins even after paying the index's hamming weight, and the
    (truncated) word is recorded either way.  Payloads go out through DBI.
    """

    scheme = "mbdc"

    def __init__(self, capacity: int = 64, trunc_mask: int = 0):
        self.table = DataTable(capacity, dedupe=True)
        self.trunc_mask = trunc_mask & WORD_MASK
        self._keep = WORD_MASK & ~self.trunc_mask

    def step(self, w: int) -> Frame:
        wp = w & self._keep
        if wp == 0:
            return Frame(FrameType.ZERO, 0)
        return self._encode_exact(wp, self.table.search(wp, self.trunc_mask))

    def _encode_exact(self, wp: int, m: MseResult | None) -> Frame:
        if m is not None and wp.bit_count() > m.xor_weight + m.index.bit_count():
            payload, flags = dbi_encode(wp ^ (m.entry & self._keep))
            frame = Frame(FrameType.XOR_ENCODED, payload, dbi_flags=flags, index=m.index)
        else:
            payload, flags = dbi_encode(wp)
            frame = Frame(FrameType.RAW, payload, dbi_flags=flags)
        self.table.insert(wp)
        return frame


class MbdcDecoder:
    def __init__(self, capacity: int = 64, trunc_mask: int = 0):
        self.table = DataTable(capacity, dedupe=True)
        self.trunc_mask = trunc_mask & WORD_MASK
        self._keep = WORD_MASK & ~self.trunc_mask

    def step(self, f: Frame) -> int:
        if f.frame_type == FrameType.ZERO:
            return 0
        if f.frame_type == FrameType.XOR_ENCODED:
            if f.index is None or f.index >= self.table.occupancy:
                raise DesyncError(f"index {f.index} beyond occupancy {self.table.occupancy}")
            wp = dbi_decode(f.payload, f.dbi_flags) ^ (self.table.entry_at(f.index) & self._keep)
        elif f.frame_type == FrameType.RAW:
            wp = dbi_decode(f.payload, f.dbi_flags)
        else:
            raise MalformedFrameError(f"unexpected frame type {f.frame_type.name} for mbdc")
        self.table.insert(wp)
        return wp


# --- skip-transfer coder ------------------------------------------------------


class ZacDestEncoder(MbdcEncoder):
    """MBDC plus transfer skipping under the similarity/tolerance gates.

    A skip sends only the one-hot slot index of the most similar entry on
    the data lines; the table is deliberately not updated (the receiver
    substitutes an entry it already holds).  Streams with
    ``approx_allowed=False`` degrade to plain MBDC.
    """

    scheme = "zacdest"

    def __init__(self, config: ApproxConfig, capacity: int = 64,
                 trunc_mask: int | None = None, tol_mask: int | None = None):
        if trunc_mask is None or tol_mask is None:
            uniform_trunc, uniform_tol = config.chip_masks()[0]
            trunc_mask = uniform_trunc if trunc_mask is None else trunc_mask
            tol_mask = uniform_tol if tol_mask is None else tol_mask
        super().__init__(capacity, trunc_mask)
        self.config = config
        self.tol_mask = tol_mask & WORD_MASK

    def step(self, w: int) -> Frame:
        wp = w & self._keep
        if wp == 0:
            return Frame(FrameType.ZERO, 0)
        m = self.table.search(wp, self.trunc_mask)
        if (
            self.config.approx_allowed
            and m is not None
            and m.xor_weight <= self.config.similarity_limit_bits
            and ((wp ^ m.entry) & self.tol_mask) == 0
        ):
            return Frame(FrameType.OHE_SKIP, ohe_encode(m.index))
        return self._encode_exact(wp, m)


class ZacDestDecoder(MbdcDecoder):
    def __init__(self, config: ApproxConfig, capacity: int = 64,
                 trunc_mask: int | None = None, tol_mask: int | None = None):
        if trunc_mask is None:
            trunc_mask = config.chip_masks()[0][0]
        super().__init__(capacity, trunc_mask)
        self.config = config

    def step(self, f: Frame) -> int:
        if f.frame_type == FrameType.OHE_SKIP:
            slot = ohe_decode(f.payload)
            if slot >= self.table.occupancy:
                raise DesyncError(f"one-hot slot {slot} beyond occupancy {self.table.occupancy}")
            return self.table.entry_at(slot) & self._keep
        return super().step(f)


# --- factory ------------------------------------------------------------------

SCHEMES = ("org", "dbi", "bde_org", "mbdc", "zacdest")


def make_codec_pair(
    scheme: str,
    *,
    capacity: int = 64,
    config: ApproxConfig | None = None,
    trunc_mask: int | None = None,
    tol_mask: int | None = None,
    update_policy: str = "raw-only",
):
    """Build a matched (encoder, decoder) pair for one chip's stream.

    Explicit ``trunc_mask``/``tol_mask`` are this chip's resolved masks
    (they vary per chip in float32 mode); left unset, they derive from
    ``config``.  ``config`` is required for zacdest.
    """
    if scheme == "org":
        return OrgEncoder(), OrgDecoder()
    if scheme == "dbi":
        return DbiEncoder(), DbiDecoder()
    if scheme == "bde_org":
        return BdeOrgEncoder(capacity, update_policy), BdeOrgDecoder(capacity, update_policy)
    if scheme == "mbdc":
        if trunc_mask is None:
            trunc_mask = config.chip_masks()[0][0] if config is not None else 0
        return MbdcEncoder(capacity, trunc_mask), MbdcDecoder(capacity, trunc_mask)
    if scheme == "zacdest":
        if config is None:
            raise ValueError("zacdest requires an ApproxConfig")
        enc = ZacDestEncoder(config, capacity, trunc_mask, tol_mask)
        dec = ZacDestDecoder(config, capacity, trunc_mask, tol_mask)
        return enc, dec
    raise ValueError(f"unknown scheme {scheme!r}; valid: {SCHEMES}")
