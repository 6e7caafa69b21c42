"""Trace ingestion: turn images, float32 tensors and raw bytes into
64-byte cache-line streams, and invert the mapping after decode.

Pixels are serialized row-major with RGB interleaved per pixel; float32
values are little-endian.  Streams are zero-padded to a whole number of
cache lines and remember the padding so reconstruction is exact.

On-disk trace format (little-endian, bit-exact across platforms):

    magic 'DSTR' | u16 version | u8 kind | u8 elem_bits | u8 approx |
    u8 ndim | u16 reserved | 4 x u32 shape | u32 pad_len | u64 n_lines |
    raw 64-byte records

A hex text mode ('DSTRHEX' header line followed by one 128-hex-char row
per cache line) serves as the human-readable debug form.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import LINE_BYTES, bulk_split

_MAGIC = b"DSTR"
_HEX_MAGIC = "DSTRHEX"
_VERSION = 1
_HEADER = struct.Struct("<4sHBBBBH4IIQ")
_KIND_CODES = {"raw": 0, "image": 1, "tensor_f32": 2}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


class TraceFormatError(ValueError):
    """Malformed trace file or metadata/payload mismatch."""


@dataclass(frozen=True)
class TraceMeta:
    kind: str
    shape: tuple[int, ...]
    elem_bits: int
    approx_allowed: bool
    pad_len: int

    def __post_init__(self) -> None:
        if self.kind not in _KIND_CODES:
            raise TraceFormatError(f"unknown stream kind {self.kind!r}")
        if len(self.shape) > 4:
            raise TraceFormatError("at most 4 dimensions are supported")
        if not 0 <= self.pad_len < LINE_BYTES:
            raise TraceFormatError(f"pad_len must be in [0, 64), got {self.pad_len}")


@dataclass(frozen=True)
class TraceStream:
    """A padded byte stream plus the metadata needed for exact inversion."""

    data: bytes
    meta: TraceMeta

    def __post_init__(self) -> None:
        if len(self.data) % LINE_BYTES:
            raise TraceFormatError("stream length must be a multiple of 64 bytes")
        payload = len(self.data) - self.meta.pad_len
        if self.meta.pad_len and payload < 0:
            raise TraceFormatError("padding exceeds stream length")

    @property
    def n_lines(self) -> int:
        return len(self.data) // LINE_BYTES

    @property
    def payload(self) -> bytes:
        return self.data[: len(self.data) - self.meta.pad_len]

    def words(self) -> np.ndarray:
        """Chip-word view: (n_lines, 8) uint64."""
        return bulk_split(self.data)

    def with_data(self, data: bytes) -> "TraceStream":
        """Same metadata, different (e.g. decoded) bytes."""
        if len(data) != len(self.data):
            raise TraceFormatError(
                f"decoded byte count {len(data)} != stream length {len(self.data)}"
            )
        return replace(self, data=data)


def _pad(raw: bytes) -> tuple[bytes, int]:
    pad = (-len(raw)) % LINE_BYTES
    return raw + bytes(pad), pad


def image_to_cache_lines(img: np.ndarray, approx_allowed: bool = True) -> TraceStream:
    """Serialize an 8-bit grayscale (h, w) or RGB (h, w, 3) raster."""
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise TraceFormatError(f"images must be 8-bit, got dtype {img.dtype}")
    if img.ndim == 2:
        pass
    elif img.ndim == 3 and img.shape[2] == 3:
        pass
    else:
        raise TraceFormatError(f"expected (h, w) or (h, w, 3) raster, got shape {img.shape}")
    data, pad = _pad(np.ascontiguousarray(img).tobytes())
    meta = TraceMeta("image", img.shape, 8, approx_allowed, pad)
    return TraceStream(data, meta)


def cache_lines_to_image(stream: TraceStream) -> np.ndarray:
    """Exact inverse of :func:`image_to_cache_lines` (padding stripped)."""
    if stream.meta.kind != "image":
        raise TraceFormatError(f"stream kind is {stream.meta.kind!r}, not image")
    expect = int(np.prod(stream.meta.shape))
    payload = stream.payload
    if len(payload) != expect:
        raise TraceFormatError(f"payload is {len(payload)} bytes, metadata says {expect}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(stream.meta.shape)


def tensor_f32_to_cache_lines(t: np.ndarray, approx_allowed: bool = True) -> TraceStream:
    """Serialize a float32 tensor little-endian.

    Streams of this kind get the sign/exponent tolerance masks applied
    automatically when simulated under a float32 configuration.
    """
    t = np.asarray(t, dtype="<f4")
    data, pad = _pad(np.ascontiguousarray(t).tobytes())
    meta = TraceMeta("tensor_f32", t.shape, 32, approx_allowed, pad)
    return TraceStream(data, meta)


def cache_lines_to_tensor(stream: TraceStream) -> np.ndarray:
    if stream.meta.kind != "tensor_f32":
        raise TraceFormatError(f"stream kind is {stream.meta.kind!r}, not tensor_f32")
    expect = int(np.prod(stream.meta.shape)) * 4
    payload = stream.payload
    if len(payload) != expect:
        raise TraceFormatError(f"payload is {len(payload)} bytes, metadata says {expect}")
    return np.frombuffer(payload, dtype="<f4").reshape(stream.meta.shape)


def raw_to_cache_lines(source: bytes | str | Path, approx_allowed: bool = False) -> TraceStream:
    """Chunk an arbitrary byte source; no semantic masks are attached."""
    raw = Path(source).read_bytes() if not isinstance(source, bytes) else source
    data, pad = _pad(raw)
    meta = TraceMeta("raw", (len(raw),), 8, approx_allowed, pad)
    return TraceStream(data, meta)


def cache_lines_to_raw(stream: TraceStream) -> bytes:
    if stream.meta.kind != "raw":
        raise TraceFormatError(f"stream kind is {stream.meta.kind!r}, not raw")
    return stream.payload


# --- on-disk formats ----------------------------------------------------------


def save_trace(stream: TraceStream, path: str | Path, fmt: str = "binary") -> None:
    path = Path(path)
    if fmt == "binary":
        path.write_bytes(_to_binary(stream))
    elif fmt == "hex":
        path.write_text(_to_hex(stream))
    else:
        raise TraceFormatError(f"format must be 'binary' or 'hex', got {fmt!r}")


def load_trace(path: str | Path) -> TraceStream:
    """Load either format; the file's leading magic decides."""
    blob = Path(path).read_bytes()
    # the hex magic extends the binary one, so test it first
    if blob.startswith(_HEX_MAGIC.encode()):
        return _from_hex(blob.decode("ascii"))
    if blob.startswith(_MAGIC):
        return _from_binary(blob)
    raise TraceFormatError(f"{path}: not a trace file (bad magic)")


def _to_binary(stream: TraceStream) -> bytes:
    m = stream.meta
    dims = list(m.shape) + [0] * (4 - len(m.shape))
    header = _HEADER.pack(
        _MAGIC, _VERSION, _KIND_CODES[m.kind], m.elem_bits,
        int(m.approx_allowed), len(m.shape), 0, *dims, m.pad_len, stream.n_lines,
    )
    return header + stream.data


def _from_binary(blob: bytes) -> TraceStream:
    if len(blob) < _HEADER.size:
        raise TraceFormatError("truncated trace header")
    magic, version, kind, elem_bits, approx, ndim, _res, d0, d1, d2, d3, pad, n_lines = (
        _HEADER.unpack_from(blob)
    )
    if magic != _MAGIC:
        raise TraceFormatError("bad magic")
    if version != _VERSION:
        raise TraceFormatError(f"unsupported trace version {version}")
    if kind not in _KIND_NAMES:
        raise TraceFormatError(f"unknown kind code {kind}")
    shape = tuple((d0, d1, d2, d3)[:ndim])
    data = blob[_HEADER.size :]
    if len(data) != n_lines * LINE_BYTES:
        raise TraceFormatError(
            f"payload is {len(data)} bytes, header says {n_lines * LINE_BYTES}"
        )
    meta = TraceMeta(_KIND_NAMES[kind], shape, elem_bits, bool(approx), pad)
    return TraceStream(data, meta)


def _to_hex(stream: TraceStream) -> str:
    m = stream.meta
    shape = "x".join(str(d) for d in m.shape) or "0"
    lines = [
        f"{_HEX_MAGIC} v{_VERSION} kind={m.kind} elem={m.elem_bits} "
        f"approx={int(m.approx_allowed)} shape={shape} pad={m.pad_len} lines={stream.n_lines}"
    ]
    for i in range(stream.n_lines):
        lines.append(stream.data[i * LINE_BYTES : (i + 1) * LINE_BYTES].hex())
    return "\n".join(lines) + "\n"


def _from_hex(text: str) -> TraceStream:
    rows = text.splitlines()
    if not rows:
        raise TraceFormatError("empty hex trace")
    head = rows[0].split()
    if head[0] != _HEX_MAGIC or len(head) < 2 or head[1] != f"v{_VERSION}":
        raise TraceFormatError(f"bad hex trace header: {rows[0]!r}")
    fields = dict(item.split("=", 1) for item in head[2:])
    try:
        kind = fields["kind"]
        elem = int(fields["elem"])
        approx = bool(int(fields["approx"]))
        shape = tuple(int(d) for d in fields["shape"].split("x")) if fields["shape"] != "0" else ()
        pad = int(fields["pad"])
        n_lines = int(fields["lines"])
    except (KeyError, ValueError) as exc:
        raise TraceFormatError(f"bad hex trace header field: {exc}") from exc
    body = [r.strip() for r in rows[1:] if r.strip()]
    if len(body) != n_lines:
        raise TraceFormatError(f"expected {n_lines} hex rows, found {len(body)}")
    data = bytearray()
    for lineno, row in enumerate(body, start=2):
        if len(row) != LINE_BYTES * 2:
            raise TraceFormatError(f"line {lineno}: expected 128 hex chars, got {len(row)}")
        try:
            data.extend(bytes.fromhex(row))
        except ValueError as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from exc
    return TraceStream(bytes(data), TraceMeta(kind, shape, elem, approx, pad))
