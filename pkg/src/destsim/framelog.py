"""Frame log emission: one record per chip per chip word.

Two formats share the record content {frame_type, payload, dbi_flags,
index, config id}: a JSON-lines debug form and a fixed-layout binary form
(little-endian throughout, so logs are bit-exact across platforms).

Binary layout: header ``DSFL | u16 version | u16 len | config-id utf-8``
followed by 16-byte records ``u32 line | u8 chip | u8 type | u8 flags |
u8 index (0xff = idle) | u64 payload``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterator

from .codec import Frame, FrameType

_MAGIC = b"DSFL"
_VERSION = 1
_RECORD = struct.Struct("<IBBBBQ")
_NO_INDEX = 0xFF


class FrameLogError(ValueError):
    pass


class BinaryFrameLogWriter:
    """Streaming binary sink; usable as the pipeline's ``frame_sink``."""

    def __init__(self, path: str | Path, config_id: str = ""):
        ident = config_id.encode("utf-8")
        self._fh = open(path, "wb")
        self._fh.write(_MAGIC + struct.pack("<HH", _VERSION, len(ident)) + ident)

    def __call__(self, line: int, chip: int, frame: Frame) -> None:
        idx = _NO_INDEX if frame.index is None else frame.index
        self._fh.write(
            _RECORD.pack(line, chip, int(frame.frame_type), frame.dbi_flags, idx, frame.payload)
        )

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "BinaryFrameLogWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_binary_frame_log(path: str | Path) -> tuple[str, list[tuple[int, int, Frame]]]:
    blob = Path(path).read_bytes()
    if not blob.startswith(_MAGIC):
        raise FrameLogError("not a frame log (bad magic)")
    version, ident_len = struct.unpack_from("<HH", blob, 4)
    if version != _VERSION:
        raise FrameLogError(f"unsupported frame log version {version}")
    pos = 8 + ident_len
    config_id = blob[8:pos].decode("utf-8")
    body = blob[pos:]
    if len(body) % _RECORD.size:
        raise FrameLogError("truncated frame record")
    records = []
    for off in range(0, len(body), _RECORD.size):
        line, chip, ftype, flags, idx, payload = _RECORD.unpack_from(body, off)
        frame = Frame(
            FrameType(ftype), payload, dbi_flags=flags,
            index=None if idx == _NO_INDEX else idx,
        )
        records.append((line, chip, frame))
    return config_id, records


class JsonlFrameLogWriter:
    """JSON-lines sink for eyeballing streams; first line carries the config id."""

    def __init__(self, path: str | Path, config_id: str = ""):
        self._fh = open(path, "w")
        self._fh.write(json.dumps({"config": config_id}) + "\n")

    def __call__(self, line: int, chip: int, frame: Frame) -> None:
        self._fh.write(
            json.dumps(
                {
                    "line": line,
                    "chip": chip,
                    "type": frame.frame_type.name,
                    "payload": f"0x{frame.payload:016x}",
                    "dbi": f"0x{frame.dbi_flags:02x}",
                    "index": frame.index,
                },
                separators=(",", ":"),
            )
            + "\n"
        )

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "JsonlFrameLogWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_jsonl_frame_log(path: str | Path) -> tuple[str, list[tuple[int, int, Frame]]]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FrameLogError("empty frame log")
    header = json.loads(lines[0])
    records = []
    for row in lines[1:]:
        obj = json.loads(row)
        frame = Frame(
            FrameType[obj["type"]],
            int(obj["payload"], 16),
            dbi_flags=int(obj["dbi"], 16),
            index=obj["index"],
        )
        records.append((obj["line"], obj["chip"], frame))
    return header.get("config", ""), records


def iter_frames(records: list[tuple[int, int, Frame]]) -> Iterator[tuple[int, Frame]]:
    """(chip, frame) view of a loaded log, for frame_stats."""
    for _line, chip, frame in records:
        yield chip, frame
