"""Report emission: long-form CSV and JSON, deterministic byte-for-byte.

One row per (stream, scheme, grid point).  Percentage deltas are written
alongside the raw counts they derive from, so a reader can always
recompute them exactly; floats use repr (shortest round-trip) formatting.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

ENERGY_COLUMNS = [
    "stream", "scheme", "limit_bits", "trunc_bits_per_value", "tol_mode",
    "capacity", "frames",
    "term_data", "term_index", "term_flags", "term_total", "term_total_excl_flags",
    "sw_data", "sw_index", "sw_flags", "sw_total", "sw_total_excl_flags",
    "term_joules", "switch_joules", "term_joules_excl_flags", "switch_joules_excl_flags",
    "i_term_a", "v_dd_v", "t_bit_s", "c_line_f",
    "baseline", "term_delta_pct", "sw_delta_pct",
]

QUALITY_COLUMNS = [
    "stream", "scheme", "limit_bits", "trunc_bits_per_value", "tol_mode",
    "psnr_db", "ssim", "psnr_ratio_vs_baseline", "ssim_ratio_vs_baseline",
    "float32_protection",
    "raw_frac", "zero_frac", "ohe_skip_frac", "xor_encoded_frac",
]

FRAMEMIX_COLUMNS = [
    "stream", "scheme", "limit_bits", "trunc_bits_per_value", "tol_mode",
    "chip", "raw_frac", "zero_frac", "ohe_skip_frac", "xor_encoded_frac",
]


def fmt(value) -> str:
    """Stable cell formatting: ints plain, floats via repr, None empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


_IDENTITY_COLUMNS = ("stream", "scheme", "limit_bits", "trunc_bits_per_value",
                     "tol_mode", "chip")


def _sort_key(row: dict) -> tuple:
    key = []
    for c in _IDENTITY_COLUMNS:
        v = row.get(c)
        # numbers sort numerically, everything else as text
        key.append((0, v, "") if isinstance(v, (int, float)) else (1, 0, fmt(v)))
    return tuple(key)


def write_csv(path: str | Path, columns: Sequence[str], rows: Sequence[dict]) -> None:
    """Rows are sorted by their identity columns before writing."""
    ordered = sorted(rows, key=_sort_key)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in ordered:
            w.writerow([fmt(row.get(c)) for c in columns])


def write_json(path: str | Path, rows: Sequence[dict]) -> None:
    with open(path, "w") as fh:
        json.dump(sorted(rows, key=_sort_key), fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def reduction_pct(baseline_count: int, count: int) -> float | None:
    """Percentage reduction vs the baseline; None when the baseline is zero."""
    if baseline_count == 0:
        return None
    return (baseline_count - count) / baseline_count * 100.0
