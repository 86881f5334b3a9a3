"""Low-level helpers for the binary artifact formats.

All multi-byte integers and floats are little-endian. Every reader checks
for truncation and trailing garbage so a corrupted file fails loudly
instead of yielding a shorter table.
"""
from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from .errors import FormatError

MAGIC_WVEC = b"WVEC"
MAGIC_RELC = b"RELC"
MAGIC_INFC = b"INFC"
MAGIC_COND = b"COND"
FORMAT_VERSION = 1


def read_exact(f: BinaryIO, n: int, path: str, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(f"{path}: truncated while reading {what} "
                          f"(wanted {n} bytes, got {len(buf)})")
    return buf


def read_u16(f: BinaryIO, path: str, what: str) -> int:
    return struct.unpack("<H", read_exact(f, 2, path, what))[0]


def read_u32(f: BinaryIO, path: str, what: str) -> int:
    return struct.unpack("<I", read_exact(f, 4, path, what))[0]


def read_u64(f: BinaryIO, path: str, what: str) -> int:
    return struct.unpack("<Q", read_exact(f, 8, path, what))[0]


def read_f64(f: BinaryIO, path: str, what: str) -> float:
    return struct.unpack("<d", read_exact(f, 8, path, what))[0]


def read_f32_array(f: BinaryIO, count: int, path: str, what: str) -> np.ndarray:
    buf = read_exact(f, 4 * count, path, what)
    return np.frombuffer(buf, dtype="<f4").copy()


def read_f64_array(f: BinaryIO, count: int, path: str, what: str) -> np.ndarray:
    buf = read_exact(f, 8 * count, path, what)
    return np.frombuffer(buf, dtype="<f8").copy()


def read_token(f: BinaryIO, path: str, what: str) -> str:
    length = read_u16(f, path, f"{what} length")
    raw = read_exact(f, length, path, what)
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: {what} is not valid UTF-8") from exc


def write_token(f: BinaryIO, token: str) -> None:
    raw = token.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise FormatError(f"token too long for u16 length prefix: {token[:40]}...")
    f.write(struct.pack("<H", len(raw)))
    f.write(raw)


def check_header(f: BinaryIO, magic: bytes, path: str) -> None:
    got = read_exact(f, 4, path, "magic")
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    version = read_u32(f, path, "version")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")


def check_eof(f: BinaryIO, path: str) -> None:
    extra = f.read(1)
    if extra:
        raise FormatError(f"{path}: trailing bytes after final record")
