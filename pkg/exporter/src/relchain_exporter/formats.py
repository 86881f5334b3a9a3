"""Writers for the relchain binary wire formats.

These layouts are the contract with the consuming component and are
restated here on purpose; the files must be bit-exact:

WVEC: magic ``WVEC``, u32 version=1, u32 dim, u64 count, then per record
      [u16 token byte length, UTF-8 token, dim x f32 little-endian].
RELC: magic ``RELC``, u32 version=1, u32 dim, u64 count, then per record
      [u16 len_a, UTF-8 a, u16 len_b, UTF-8 b, dim x f32 little-endian].

All integers are little-endian. Writers append records and patch the
count into the header last, so a crashed export never masquerades as a
complete file with a plausible count.
"""
from __future__ import annotations

import re
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

MAGIC_WVEC = b"WVEC"
MAGIC_RELC = b"RELC"
VERSION = 1

_COUNT_OFFSET = 12  # magic + version + dim
_WS_RUN = re.compile(r"\s+")


def normalize(token: str) -> str:
    """Same rule as the consumer: lowercase, whitespace runs to one underscore."""
    canon = _WS_RUN.sub("_", token.strip()).lower()
    if not canon:
        raise ValueError(f"empty token: {token!r}")
    return canon


def _write_token(f: BinaryIO, token: str) -> None:
    raw = token.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"token too long for u16 length prefix: {token[:40]}...")
    f.write(struct.pack("<H", len(raw)))
    f.write(raw)


class _PatchedCountWriter:
    """Streams records after a header whose count gets patched on close."""

    def __init__(self, path: str | Path, magic: bytes, dim: int):
        self.path = Path(path)
        self.count = 0
        self._f = open(self.path, "wb")
        self._f.write(magic)
        self._f.write(struct.pack("<I", VERSION))
        self._f.write(struct.pack("<I", dim))
        self._f.write(struct.pack("<Q", 0))

    def write_vector(self, vec: np.ndarray) -> None:
        self._f.write(np.ascontiguousarray(vec, dtype="<f4").tobytes())

    def write_token(self, token: str) -> None:
        _write_token(self._f, token)

    def bump(self) -> None:
        self.count += 1

    def close(self) -> None:
        self._f.seek(_COUNT_OFFSET)
        self._f.write(struct.pack("<Q", self.count))
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self._f.close()
            self.path.unlink(missing_ok=True)
