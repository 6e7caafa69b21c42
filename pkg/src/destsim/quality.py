"""Output-quality metrics on reconstructed data and frame-mix statistics.

PSNR is the usual 10*log10(255^2 / MSE) with +inf for identical rasters.
SSIM follows the canonical formulation: mean of the local SSIM map under
an 11x11 gaussian window (sigma 1.5), K1=0.01, K2=0.03, L=255, computed
where the window fits entirely inside the image.  RGB inputs are reduced
to luminance with BT.601 weights before SSIM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .codec import Frame, FrameType

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_C1 = (0.01 * 255) ** 2
_C2 = (0.03 * 255) ** 2

_BT601 = (0.299, 0.587, 0.114)


def _check_pair(ref: np.ndarray, test: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.asarray(ref)
    test = np.asarray(test)
    if ref.shape != test.shape:
        raise ValueError(f"raster shapes differ: {ref.shape} vs {test.shape}")
    return ref, test


def to_luminance(img: np.ndarray) -> np.ndarray:
    """BT.601 luminance of an RGB raster; grayscale passes through."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 3:
        r, g, b = _BT601
        return r * img[..., 0] + g * img[..., 1] + b * img[..., 2]
    raise ValueError(f"expected (h, w) or (h, w, 3) raster, got shape {img.shape}")


def psnr(ref: np.ndarray, test: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB; +inf when the rasters are identical."""
    ref, test = _check_pair(ref, test)
    diff = ref.astype(np.float64) - test.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def _gaussian_1d(size: int, sigma: float) -> np.ndarray:
    half = size // 2
    x = np.arange(size, dtype=np.float64) - half
    k = np.exp(-(x**2) / (2 * sigma**2))
    return k / k.sum()


def _conv_valid(img: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Separable valid-mode filtering with a symmetric 1-D kernel."""
    n = len(k)
    h = img.shape[0] - n + 1
    out = np.zeros((h, img.shape[1]))
    for i in range(n):
        out += k[i] * img[i : i + h, :]
    w = img.shape[1] - n + 1
    out2 = np.zeros((h, w))
    for j in range(n):
        out2 += k[j] * out[:, j : j + w]
    return out2


def ssim(ref: np.ndarray, test: np.ndarray) -> float:
    """Mean local structural similarity in [-1, 1].

    Images smaller than the 11x11 window fall back to a single uniform
    global window.
    """
    ref, test = _check_pair(ref, test)
    x = to_luminance(ref)
    y = to_luminance(test)
    if min(x.shape) < _SSIM_WINDOW:
        return _ssim_global(x, y)
    k = _gaussian_1d(_SSIM_WINDOW, _SSIM_SIGMA)
    mx = _conv_valid(x, k)
    my = _conv_valid(y, k)
    vx = _conv_valid(x * x, k) - mx * mx
    vy = _conv_valid(y * y, k) - my * my
    cxy = _conv_valid(x * y, k) - mx * my
    num = (2 * mx * my + _C1) * (2 * cxy + _C2)
    den = (mx * mx + my * my + _C1) * (vx + vy + _C2)
    return float(np.mean(num / den))


def _ssim_global(x: np.ndarray, y: np.ndarray) -> float:
    mx = float(x.mean())
    my = float(y.mean())
    vx = float(x.var())
    vy = float(y.var())
    cxy = float(((x - mx) * (y - my)).mean())
    return ((2 * mx * my + _C1) * (2 * cxy + _C2)) / (
        (mx * mx + my * my + _C1) * (vx + vy + _C2)
    )


# --- frame-mix statistics -------------------------------------------------------

_TYPE_NAMES = tuple(t.name.lower() for t in FrameType)  # index = sideband code


@dataclass(frozen=True)
class FrameMix:
    """Fractions of each frame type over a stream, per chip and aggregate."""

    per_chip_counts: tuple[tuple[int, int, int, int], ...]

    @property
    def total_frames(self) -> int:
        return sum(sum(row) for row in self.per_chip_counts)

    def aggregate(self) -> dict[str, float]:
        total = self.total_frames
        sums = [sum(row[t] for row in self.per_chip_counts) for t in range(4)]
        return {name: sums[t] / total for t, name in enumerate(_TYPE_NAMES)}

    def chip(self, c: int) -> dict[str, float]:
        row = self.per_chip_counts[c]
        total = sum(row)
        if total == 0:
            raise ValueError(f"chip {c} saw no frames")
        return {name: row[t] / total for t, name in enumerate(_TYPE_NAMES)}

    @classmethod
    def from_counts(cls, counts: Iterable[Iterable[int]]) -> "FrameMix":
        rows = tuple(tuple(int(v) for v in row) for row in counts)
        if not rows or any(len(row) != 4 for row in rows):
            raise ValueError("expected one 4-count row per chip")
        if sum(sum(row) for row in rows) == 0:
            raise ValueError("empty frame log")
        return cls(rows)


def frame_stats(records: Iterable[tuple[int, Frame | FrameType | int]]) -> FrameMix:
    """Tally (chip, frame) records into a FrameMix; empty input is an error."""
    counts = [[0] * 4 for _ in range(8)]
    n = 0
    for chip, item in records:
        if isinstance(item, Frame):
            t = int(item.frame_type)
        else:
            t = int(item)
        counts[chip][t] += 1
        n += 1
    if n == 0:
        raise ValueError("empty frame log")
    return FrameMix.from_counts(counts)
