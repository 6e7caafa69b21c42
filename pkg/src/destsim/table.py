"""Per-chip recent-transfer data table with most-similar-entry search.

The table models a fixed bank of physical slots: words are written into
slot 0, 1, ... until the table is full, after which a ring pointer
overwrites the oldest slot (FIFO eviction).  Slot indices therefore stay
stable across insertions, which the encoder relies on -- a transmitted
index must mean the same slot at both ends of the channel.

With ``dedupe=True`` (modified coder behavior) an insert of an
already-present word is a no-op, so the table never holds duplicates;
with ``dedupe=False`` (original coder) duplicates accumulate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .core import WORD_MASK


@dataclass(frozen=True)
class MseResult:
    """Outcome of a most-similar-entry search.

    ``xor_weight`` is the hamming weight of ``(entry XOR query)`` restricted
    to non-truncated bits.
    """

    index: int
    entry: int
    xor_weight: int


class DataTable:
    def __init__(self, capacity: int = 64, dedupe: bool = False):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.dedupe = dedupe
        self._slots: list[int] = []
        self._head = 0  # next slot to overwrite once full
        self._present: set[int] = set()

    @property
    def occupancy(self) -> int:
        return len(self._slots)

    def entries(self) -> tuple[int, ...]:
        """Snapshot of occupied slots in slot order."""
        return tuple(self._slots)

    def entry_at(self, index: int) -> int:
        return self._slots[index]

    def __contains__(self, w: int) -> bool:
        if self.dedupe:
            return w in self._present
        return w in self._slots  # duplicates possible; the set is not exact

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DataTable):
            return NotImplemented
        return (
            self.capacity == other.capacity
            and self.dedupe == other.dedupe
            and self._slots == other._slots
            and self._head == other._head
        )

    def search(self, query: int, trunc_mask: int = 0) -> MseResult | None:
        """Find the occupied entry minimizing masked XOR weight.

        Truncated bits are excluded from the comparison.  Ties break to the
        lowest slot index; returns None when the table is empty.
        """
        keep = WORD_MASK & ~trunc_mask
        best_i = -1
        best_w = 65
        for i, e in enumerate(self._slots):
            w = ((e ^ query) & keep).bit_count()
            if w < best_w:
                best_i, best_w = i, w
        if best_i < 0:
            return None
        return MseResult(best_i, self._slots[best_i], best_w)

    def insert(self, w: int) -> None:
        """Record a transferred word, evicting the oldest entry when full."""
        if self.dedupe and w in self._present:
            return
        if len(self._slots) < self.capacity:
            self._slots.append(w)
        else:
            old = self._slots[self._head]
            self._present.discard(old)
            self._slots[self._head] = w
            self._head = (self._head + 1) % self.capacity
        self._present.add(w)

    def to_debug_json(self) -> str:
        """Serialize a snapshot for sender/receiver sync audits."""
        return json.dumps(
            {
                "capacity": self.capacity,
                "dedupe": self.dedupe,
                "occupancy": self.occupancy,
                "write_head": self._head,
                "slots": [f"0x{w:016x}" for w in self._slots],
            }
        )
