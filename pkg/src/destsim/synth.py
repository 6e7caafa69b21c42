"""Seeded synthetic inputs: photographic-style rasters and correlated streams.

The image generator layers smooth low-frequency structure, band-limited
texture and a little sensor-style noise, so traces built from it show the
inter-line similarity real photographs have while the low pixel bits stay
close to uniform.  Everything is deterministic in the seed.
"""

from __future__ import annotations

import numpy as np


def synthetic_image(height: int, width: int, seed: int, rgb: bool = False) -> np.ndarray:
    rng = np.random.default_rng(seed)
    channels = 3 if rgb else 1
    out = np.empty((height, width, channels), dtype=np.uint8)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    for ch in range(channels):
        img = np.zeros((height, width))
        for _ in range(4):
            fy = rng.uniform(0.5, 3.0)
            fx = rng.uniform(0.5, 3.0)
            phase = rng.uniform(0, 2 * np.pi)
            amp = rng.uniform(15, 35)
            img += amp * np.cos(2 * np.pi * (fy * yy / height + fx * xx / width) + phase)
        # detail strength varies across the frame the way it does in
        # photographs: flat sky/shadow regions next to textured ones
        detail = 0.15 + 1.1 * np.clip(
            _coarse_texture(height, width, rng, scale=16, amp=0.5) + 0.5, 0.0, 1.0
        )
        img += detail * _coarse_texture(height, width, rng, scale=8, amp=30.0)
        img += detail * rng.normal(0, 6.0, size=(height, width))
        img += 128.0
        out[..., ch] = np.clip(img, 0, 255).astype(np.uint8)
    return out[..., 0] if not rgb else out


def _coarse_texture(h: int, w: int, rng: np.random.Generator, scale: int, amp: float):
    ch = (h + scale - 1) // scale
    cw = (w + scale - 1) // scale
    coarse = rng.normal(0, 1.0, size=(ch + 1, cw + 1))
    # bilinear upsample of the coarse grid
    y = np.linspace(0, ch - 1e-9, h)
    x = np.linspace(0, cw - 1e-9, w)
    y0 = y.astype(int)
    x0 = x.astype(int)
    fy = (y - y0)[:, None]
    fx = (x - x0)[None, :]
    c00 = coarse[y0][:, x0]
    c01 = coarse[y0][:, x0 + 1]
    c10 = coarse[y0 + 1][:, x0]
    c11 = coarse[y0 + 1][:, x0 + 1]
    interp = (1 - fy) * ((1 - fx) * c00 + fx * c01) + fy * ((1 - fx) * c10 + fx * c11)
    return amp * interp


def correlated_words(n_lines: int, seed: int, zero_fraction: float = 0.05) -> np.ndarray:
    """(n_lines, 8) chip words mixing repeats, near-duplicates and fresh noise."""
    rng = np.random.default_rng(seed)
    fresh = rng.integers(0, 1 << 64, size=(n_lines, 8), dtype=np.uint64)
    words = fresh.copy()
    recycled = np.roll(fresh, 3, axis=0)
    flips = rng.integers(0, 1 << 18, size=(n_lines, 8), dtype=np.uint64)
    mode = rng.random((n_lines, 8))
    words = np.where(mode < 0.55, recycled ^ flips, words)
    words[mode < zero_fraction] = 0
    return words
