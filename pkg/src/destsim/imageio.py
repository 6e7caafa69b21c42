"""Minimal lossless image I/O: binary PGM/PPM read+write, PNG read.

Only what the trace workflow needs: 8-bit grayscale and RGB rasters.
The PNG reader handles the common baseline subset (bit depth 8, color
types 0/2/3, no interlace) on stdlib zlib so the package carries no
imaging dependency.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np


class ImageFormatError(ValueError):
    pass


# --- PGM / PPM ---------------------------------------------------------------


def _read_pnm_header(blob: bytes, magic: bytes) -> tuple[int, int, int, int]:
    """Parse 'P5'/'P6' headers; returns (width, height, maxval, data offset)."""
    if not blob.startswith(magic):
        raise ImageFormatError(f"expected {magic.decode()} file")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated header")
        try:
            fields.append(int(blob[start:pos]))
        except ValueError as exc:
            raise ImageFormatError(f"bad header token {blob[start:pos]!r}") from exc
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise ImageFormatError(f"only 8-bit images supported (maxval {maxval})")
    return width, height, maxval, pos


def read_pgm(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    w, h, _, off = _read_pnm_header(blob, b"P5")
    data = blob[off : off + w * h]
    if len(data) != w * h:
        raise ImageFormatError(f"expected {w * h} pixel bytes, got {len(data)}")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w)


def read_ppm(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    w, h, _, off = _read_pnm_header(blob, b"P6")
    data = blob[off : off + w * h * 3]
    if len(data) != w * h * 3:
        raise ImageFormatError(f"expected {w * h * 3} pixel bytes, got {len(data)}")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3)


def write_pgm(path: str | Path, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=np.uint8)
    if img.ndim != 2:
        raise ImageFormatError("write_pgm needs a (h, w) grayscale raster")
    h, w = img.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + img.tobytes())


def write_ppm(path: str | Path, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ImageFormatError("write_ppm needs a (h, w, 3) RGB raster")
    h, w, _ = img.shape
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode() + img.tobytes())


# --- PNG (read only) -----------------------------------------------------------

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def read_png(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if not blob.startswith(_PNG_MAGIC):
        raise ImageFormatError("not a PNG file")
    pos = len(_PNG_MAGIC)
    ihdr = None
    palette = None
    idat = bytearray()
    while pos + 8 <= len(blob):
        length, ctype = struct.unpack_from(">I4s", blob, pos)
        pos += 8
        chunk = blob[pos : pos + length]
        pos += length + 4  # skip CRC
        if ctype == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", chunk)
        elif ctype == b"PLTE":
            palette = np.frombuffer(chunk, dtype=np.uint8).reshape(-1, 3)
        elif ctype == b"IDAT":
            idat.extend(chunk)
        elif ctype == b"IEND":
            break
    if ihdr is None:
        raise ImageFormatError("missing IHDR chunk")
    width, height, depth, color, _comp, _filt, interlace = ihdr
    if depth != 8:
        raise ImageFormatError(f"only bit depth 8 supported, got {depth}")
    if interlace:
        raise ImageFormatError("interlaced PNGs are not supported")
    channels = {0: 1, 2: 3, 3: 1}.get(color)
    if channels is None:
        raise ImageFormatError(f"unsupported color type {color}")
    raw = zlib.decompress(bytes(idat))
    stride = width * channels
    if len(raw) != (stride + 1) * height:
        raise ImageFormatError("IDAT length does not match dimensions")
    img = _unfilter(raw, height, stride, channels)
    if color == 3:
        if palette is None:
            raise ImageFormatError("palette image without PLTE chunk")
        img = palette[img.reshape(height, width)]
        return np.ascontiguousarray(img)
    if channels == 1:
        return img.reshape(height, width)
    return img.reshape(height, width, 3)


def _unfilter(raw: bytes, height: int, stride: int, bpp: int) -> np.ndarray:
    out = np.zeros((height, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.int32)
    for y in range(height):
        ftype = raw[y * (stride + 1)]
        line = np.frombuffer(
            raw, dtype=np.uint8, count=stride, offset=y * (stride + 1) + 1
        ).astype(np.int32)
        if ftype == 0:
            cur = line
        elif ftype == 1:  # Sub
            cur = line.copy()
            for x in range(bpp, stride):
                cur[x] = (cur[x] + cur[x - bpp]) & 0xFF
        elif ftype == 2:  # Up
            cur = (line + prev) & 0xFF
        elif ftype == 3:  # Average
            cur = line.copy()
            for x in range(stride):
                left = cur[x - bpp] if x >= bpp else 0
                cur[x] = (cur[x] + ((left + prev[x]) >> 1)) & 0xFF
        elif ftype == 4:  # Paeth
            cur = line.copy()
            for x in range(stride):
                a = int(cur[x - bpp]) if x >= bpp else 0
                b = int(prev[x])
                c = int(prev[x - bpp]) if x >= bpp else 0
                p = a + b - c
                pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                if pa <= pb and pa <= pc:
                    pred = a
                elif pb <= pc:
                    pred = b
                else:
                    pred = c
                cur[x] = (cur[x] + pred) & 0xFF
        else:
            raise ImageFormatError(f"unknown filter type {ftype} on row {y}")
        out[y] = cur.astype(np.uint8)
        prev = cur
    return out


# --- dispatch -------------------------------------------------------------------


def read_image(path: str | Path) -> np.ndarray:
    """Read a PGM/PPM/PNG raster, dispatching on the file's magic bytes."""
    head = Path(path).open("rb").read(8)
    if head.startswith(b"P5"):
        return read_pgm(path)
    if head.startswith(b"P6"):
        return read_ppm(path)
    if head.startswith(_PNG_MAGIC):
        return read_png(path)
    raise ImageFormatError(f"{path}: unrecognized image format")


def write_image(path: str | Path, img: np.ndarray) -> None:
    """Write a raster as PGM (grayscale) or PPM (RGB) based on the extension."""
    suffix = Path(path).suffix.lower()
    img = np.asarray(img)
    if suffix == ".pgm":
        write_pgm(path, img)
    elif suffix == ".ppm":
        write_ppm(path, img)
    else:
        raise ImageFormatError(f"can only write .pgm/.ppm, got {suffix!r}")
