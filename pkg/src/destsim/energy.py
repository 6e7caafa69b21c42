"""Termination and switching energy accounting for the asymmetric-I/O channel.

Termination energy is proportional to the number of 1-valued bit-times on
a line (a transmitted 1 pulls the terminated line to ground and draws
static current); switching energy is paid per 1->0 (charging) transition,
at C*Vdd^2 each.  0->1 transitions draw nothing from the supply.

Per chip the model tracks 8 data lanes (8 bit-times per chip word), one
serial index lane (6-bit slot LSB-first on the first 6 bursts, idle 0
after), 8 DBI-flag lanes and 2 frame-type sideband lanes at one bit per
chip word each.  Counts are kept per line group -- data / index / flags --
so reports can include or exclude the flag-line overhead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .codec import Frame

_LOW64 = (1 << 64) - 1


@dataclass
class GroupCounts:
    """Event counts split by line group; flags covers DBI flags + sideband."""

    data: int = 0
    index: int = 0
    flags: int = 0

    @property
    def total(self) -> int:
        return self.data + self.index + self.flags

    @property
    def total_excl_flags(self) -> int:
        return self.data + self.index

    def add(self, other: "GroupCounts") -> None:
        self.data += other.data
        self.index += other.index
        self.flags += other.flags

    def __add__(self, other: "GroupCounts") -> "GroupCounts":
        return GroupCounts(
            self.data + other.data, self.index + other.index, self.flags + other.flags
        )


@dataclass
class EnergyParams:
    """Electrical parameters for count -> joule conversion.

    i_term_a is the extra termination current while transmitting a 1;
    c_line_f the per-line capacitance.  v_dd_v and t_bit_s have no single
    canonical source, so they are explicit parameters echoed in every
    report (defaults: 1.2 V, 2400 MT/s).
    """

    i_term_a: float = 13.75e-3
    v_dd_v: float = 1.2
    t_bit_s: float = 1.0 / 2400e6
    c_line_f: float = 15e-12

    def __post_init__(self) -> None:
        for name in ("i_term_a", "v_dd_v", "t_bit_s", "c_line_f"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def termination_j_per_one(self) -> float:
        return self.i_term_a * self.v_dd_v * self.t_bit_s

    @property
    def switching_j_per_transition(self) -> float:
        return self.c_line_f * self.v_dd_v**2


class LaneState:
    """Last transmitted bit per lane for one chip; all lanes start at 0."""

    __slots__ = ("data", "index", "flags", "sideband")

    def __init__(self) -> None:
        self.data = 0  # 8 bits, one per data lane
        self.index = 0  # 1 bit
        self.flags = 0  # 8 bits, one per DBI-flag lane
        self.sideband = 0  # 2 bits


def count_termination(f: Frame) -> GroupCounts:
    """Ones transmitted by one frame, by line group."""
    idx = f.index.bit_count() if f.index is not None else 0
    return GroupCounts(
        data=f.payload.bit_count(),
        index=idx,
        flags=f.dbi_flags.bit_count() + f.sideband.bit_count(),
    )


def count_switching(state: LaneState, f: Frame) -> GroupCounts:
    """Charging (1->0) transitions caused by one frame; updates lane history.

    Data lanes: prepending the 8-bit lane history below the payload makes
    every byte's predecessor sit one byte lower, so ``seq & ~(seq >> 8)``
    marks all 1->0 steps at once.  The index lane shifts serially; flag and
    sideband lanes see one bit per frame.
    """
    seq = state.data | (f.payload << 8)
    data = (seq & ~(seq >> 8) & _LOW64).bit_count()
    state.data = f.payload >> 56

    idx_bits = f.index if f.index is not None else 0
    iseq = state.index | (idx_bits << 1)  # LSB-first over bursts 0..5, then idle
    index = (iseq & ~(iseq >> 1) & 0xFF).bit_count()
    state.index = (iseq >> 8) & 1

    flags = (state.flags & ~f.dbi_flags).bit_count()
    state.flags = f.dbi_flags
    sb = f.sideband
    flags += (state.sideband & ~sb).bit_count()
    state.sideband = sb

    return GroupCounts(data=data, index=index, flags=flags)


@dataclass
class EnergyCounters:
    """Per-stream accumulators; merging streams is plain addition."""

    term: GroupCounts = field(default_factory=GroupCounts)
    switch: GroupCounts = field(default_factory=GroupCounts)
    frames: int = 0

    def record(self, f: Frame, lanes: LaneState) -> None:
        self.term.add(count_termination(f))
        self.switch.add(count_switching(lanes, f))
        self.frames += 1

    def merge(self, other: "EnergyCounters") -> None:
        self.term.add(other.term)
        self.switch.add(other.switch)
        self.frames += other.frames


@dataclass(frozen=True)
class EnergyReport:
    """Raw counts plus joule conversions under both flag accountings."""

    term: GroupCounts
    switch: GroupCounts
    frames: int
    params: EnergyParams
    term_joules: float
    switch_joules: float
    term_joules_excl_flags: float
    switch_joules_excl_flags: float

    def to_dict(self) -> dict:
        return {
            "frames": self.frames,
            "term_data": self.term.data,
            "term_index": self.term.index,
            "term_flags": self.term.flags,
            "term_total": self.term.total,
            "term_total_excl_flags": self.term.total_excl_flags,
            "sw_data": self.switch.data,
            "sw_index": self.switch.index,
            "sw_flags": self.switch.flags,
            "sw_total": self.switch.total,
            "sw_total_excl_flags": self.switch.total_excl_flags,
            "term_joules": self.term_joules,
            "switch_joules": self.switch_joules,
            "term_joules_excl_flags": self.term_joules_excl_flags,
            "switch_joules_excl_flags": self.switch_joules_excl_flags,
            "i_term_a": self.params.i_term_a,
            "v_dd_v": self.params.v_dd_v,
            "t_bit_s": self.params.t_bit_s,
            "c_line_f": self.params.c_line_f,
        }


def to_joules(counters: EnergyCounters, params: EnergyParams) -> EnergyReport:
    """Convert event counts to joules; linear in every count."""
    per_one = params.termination_j_per_one
    per_tr = params.switching_j_per_transition
    return EnergyReport(
        term=counters.term,
        switch=counters.switch,
        frames=counters.frames,
        params=params,
        term_joules=counters.term.total * per_one,
        switch_joules=counters.switch.total * per_tr,
        term_joules_excl_flags=counters.term.total_excl_flags * per_one,
        switch_joules_excl_flags=counters.switch.total_excl_flags * per_tr,
    )
