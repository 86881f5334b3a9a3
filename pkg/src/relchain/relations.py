"""Pair-keyed relation embedding stores and their binary format.

Keys are ordered: the embedding for (a, b) says how a relates to b, which
is generally not how b relates to a. Embeddings are float32 in memory and
on disk; consumers upcast for arithmetic.
"""
from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import binio
from .concepts import normalize
from .errors import FormatError, MissingPairError

logger = logging.getLogger(__name__)

Pair = tuple[str, str]


class RelationStore:
    """Immutable (a, b) -> relation embedding mapping."""

    def __init__(self, pairs: Sequence[Pair], matrix: np.ndarray,
                 duplicate_count: int = 0):
        if matrix.ndim != 2:
            raise ValueError("matrix must be 2-D")
        if len(pairs) != matrix.shape[0]:
            raise ValueError("pair count does not match matrix rows")
        self._pairs = [(a, b) for a, b in pairs]
        self._matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        self._index = {p: i for i, p in enumerate(self._pairs)}
        if len(self._index) != len(self._pairs):
            raise ValueError("duplicate pairs in store")
        self.duplicate_count = duplicate_count

    @classmethod
    def from_entries(cls, entries: Iterable[tuple[str, str, Sequence[float]]]) -> "RelationStore":
        """Build a store from (a, b, vector) triples; first duplicate wins."""
        pairs: list[Pair] = []
        rows: list[np.ndarray] = []
        seen: set[Pair] = set()
        dim: int | None = None
        dupes = 0
        for a, b, vec in entries:
            pair = (normalize(a), normalize(b))
            row = np.asarray(vec, dtype=np.float32)
            if dim is None:
                dim = row.size
            elif row.size != dim:
                raise ValueError(f"embedding for {pair} has dim {row.size}, expected {dim}")
            if not np.all(np.isfinite(row)):
                raise ValueError(f"non-finite components in embedding for {pair}")
            if not row.any():
                raise ValueError(f"all-zero embedding for {pair}")
            if pair in seen:
                dupes += 1
                continue
            seen.add(pair)
            pairs.append(pair)
            rows.append(row)
        if dim is None:
            raise ValueError("no entries")
        return cls(pairs, np.vstack(rows), duplicate_count=dupes)

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    @property
    def pairs(self) -> list[Pair]:
        return list(self._pairs)

    def __len__(self) -> int:
        return len(self._pairs)

    def __contains__(self, pair: Pair) -> bool:
        return pair in self._index

    def get(self, a: str, b: str) -> np.ndarray:
        """Return the embedding keyed by the ordered pair (a, b)."""
        pair = (normalize(a), normalize(b))
        try:
            return self._matrix[self._index[pair]].copy()
        except KeyError:
            raise MissingPairError(*pair) from None


def get_relation(a: str, b: str, store: RelationStore) -> np.ndarray:
    """Functional alias for :meth:`RelationStore.get`."""
    return store.get(a, b)


def load_relation_store(path: str | Path) -> RelationStore:
    """Load a RELC binary relation store."""
    name = str(path)
    with open(path, "rb") as f:
        binio.check_header(f, binio.MAGIC_RELC, name)
        dim = binio.read_u32(f, name, "dim")
        count = binio.read_u64(f, name, "count")
        if dim == 0:
            raise FormatError(f"{name}: zero dimension")
        pairs: list[Pair] = []
        rows: list[np.ndarray] = []
        seen: set[Pair] = set()
        dupes = 0
        for i in range(count):
            raw_a = binio.read_token(f, name, f"word_a #{i}")
            raw_b = binio.read_token(f, name, f"word_b #{i}")
            try:
                pair = (normalize(raw_a), normalize(raw_b))
            except ValueError as exc:
                raise FormatError(f"{name}: record #{i}: {exc}") from None
            row = binio.read_f32_array(f, dim, name, f"embedding #{i}")
            if not np.all(np.isfinite(row)):
                raise FormatError(f"{name}: record #{i}: non-finite component")
            if not row.any():
                raise FormatError(f"{name}: record #{i}: all-zero embedding")
            if pair in seen:
                dupes += 1
                continue
            seen.add(pair)
            pairs.append(pair)
            rows.append(row)
        binio.check_eof(f, name)
    if not pairs:
        raise FormatError(f"{name}: empty store")
    if dupes:
        logger.warning("%s: %d duplicate pairs dropped (first occurrence kept)",
                       name, dupes)
    return RelationStore(pairs, np.vstack(rows), duplicate_count=dupes)


def write_relation_store(store: RelationStore, path: str | Path) -> None:
    """Persist ``store`` as a RELC binary file."""
    with open(path, "wb") as f:
        f.write(binio.MAGIC_RELC)
        f.write(struct.pack("<I", binio.FORMAT_VERSION))
        f.write(struct.pack("<I", store.dim))
        f.write(struct.pack("<Q", len(store)))
        for i, (a, b) in enumerate(store._pairs):
            binio.write_token(f, a)
            binio.write_token(f, b)
            f.write(store._matrix[i].astype("<f4").tobytes())
