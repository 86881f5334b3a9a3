"""Word vector tables with exact cosine top-k neighbor search.

Vectors are stored as float32 (the on-disk precision); all cosine math is
done in float64. Search is an exhaustive scan: vocabularies at the scale
this package targets fit comfortably, and exactness is what makes the
oracle tests possible.
"""
from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import binio
from .concepts import normalize
from .errors import FormatError, NotFoundError, ParseError

logger = logging.getLogger(__name__)

_CHUNK = 65536  # rows converted to float64 at a time during scans


class WordVectorTable:
    """Immutable token -> vector mapping over a single dimensionality."""

    def __init__(self, tokens: Sequence[str], matrix: np.ndarray,
                 duplicate_count: int = 0):
        if matrix.ndim != 2:
            raise ValueError("matrix must be 2-D")
        if len(tokens) != matrix.shape[0]:
            raise ValueError("token count does not match matrix rows")
        self._tokens = list(tokens)
        self._matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        self._index = {t: i for i, t in enumerate(self._tokens)}
        if len(self._index) != len(self._tokens):
            raise ValueError("duplicate tokens in table")
        self.duplicate_count = duplicate_count
        self._norms: np.ndarray | None = None
        self._lex_rank: np.ndarray | None = None

    @classmethod
    def from_entries(cls, entries: Iterable[tuple[str, Sequence[float]]]) -> "WordVectorTable":
        """Build a table from (token, vector) pairs; first duplicate wins."""
        tokens: list[str] = []
        rows: list[np.ndarray] = []
        seen: set[str] = set()
        dim: int | None = None
        dupes = 0
        for token, vec in entries:
            tok = normalize(token)
            row = np.asarray(vec, dtype=np.float32)
            if dim is None:
                dim = row.size
            elif row.size != dim:
                raise ValueError(f"vector for {tok!r} has dim {row.size}, expected {dim}")
            if not np.all(np.isfinite(row)):
                raise ValueError(f"non-finite components in vector for {tok!r}")
            if not row.any():
                raise ValueError(f"all-zero vector for {tok!r}")
            if tok in seen:
                dupes += 1
                continue
            seen.add(tok)
            tokens.append(tok)
            rows.append(row)
        if dim is None:
            raise ValueError("no entries")
        return cls(tokens, np.vstack(rows), duplicate_count=dupes)

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def vector(self, token: str) -> np.ndarray:
        """Return the stored float32 vector for ``token``."""
        try:
            return self._matrix[self._index[token]].copy()
        except KeyError:
            raise NotFoundError(f"word not in table: {token!r}") from None

    def _norms64(self) -> np.ndarray:
        if self._norms is None:
            sq = np.zeros(len(self._tokens))
            for lo in range(0, len(self._tokens), _CHUNK):
                block = self._matrix[lo:lo + _CHUNK].astype(np.float64)
                sq[lo:lo + block.shape[0]] = np.einsum("ij,ij->i", block, block)
            self._norms = np.sqrt(sq)
        return self._norms

    def _lex_ranks(self) -> np.ndarray:
        # rank of each row's token in lexicographic order; used as a
        # deterministic tie-break key during neighbor sorts
        if self._lex_rank is None:
            order = sorted(range(len(self._tokens)), key=lambda i: self._tokens[i])
            rank = np.empty(len(self._tokens), dtype=np.int64)
            for r, i in enumerate(order):
                rank[i] = r
            self._lex_rank = rank
        return self._lex_rank

    def cosines(self, token: str) -> np.ndarray:
        """Cosine of ``token`` against every row, in float64."""
        try:
            qi = self._index[token]
        except KeyError:
            raise NotFoundError(f"word not in table: {token!r}") from None
        q = self._matrix[qi].astype(np.float64)
        dots = np.zeros(len(self._tokens))
        for lo in range(0, len(self._tokens), _CHUNK):
            block = self._matrix[lo:lo + _CHUNK].astype(np.float64)
            dots[lo:lo + block.shape[0]] = block @ q
        return dots / (self._norms64() * np.linalg.norm(q))


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two nonzero vectors, computed in float64."""
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def top_k_neighbors(word: str, k: int, table: WordVectorTable) -> list[tuple[str, float]]:
    """Exact top-k cosine neighbors of ``word``, excluding the word itself.

    Returns min(k, |vocab| - 1) entries in non-increasing score order;
    equal scores are broken by lexicographic token order.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    w = normalize(word)
    scores = table.cosines(w)  # raises NotFoundError if absent
    qi = table._index[w]
    # neg-score primary key, lexicographic rank secondary; lexsort's last
    # key is the primary one
    order = np.lexsort((table._lex_ranks(), -scores))
    out: list[tuple[str, float]] = []
    for i in order:
        if i == qi:
            continue
        out.append((table._tokens[i], float(scores[i])))
        if len(out) == k:
            break
    return out


def merged_neighbors(word: str, k: int, tables: Sequence[WordVectorTable]) -> set[str]:
    """Union of per-table top-k neighbor sets over every table containing ``word``."""
    w = normalize(word)
    found = False
    merged: set[str] = set()
    for table in tables:
        if w not in table:
            continue
        found = True
        merged.update(tok for tok, _ in top_k_neighbors(w, k, table))
    if not found:
        raise NotFoundError(f"word not in any table: {w!r}")
    return merged


def load_word_vectors(path: str | Path, format: str = "text") -> WordVectorTable:
    """Load a word vector table from ``path`` in the given format."""
    if format == "text":
        return _load_text(Path(path))
    if format == "binary":
        return _load_binary(Path(path))
    raise ValueError(f"unknown word-vector format: {format!r}")


def _load_text(path: Path) -> WordVectorTable:
    tokens: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    dim: int | None = None
    dupes = 0
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if len(parts) < 2:
                raise ParseError(str(path), lineno, "expected token plus components")
            try:
                tok = normalize(parts[0])
            except ValueError as exc:
                raise ParseError(str(path), lineno, str(exc)) from None
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise ParseError(str(path), lineno,
                                 f"expected {dim} components, found {len(parts) - 1}")
            try:
                row = np.array([float(x) for x in parts[1:]], dtype=np.float32)
            except ValueError:
                raise ParseError(str(path), lineno, "malformed component") from None
            if not np.all(np.isfinite(row)):
                raise ParseError(str(path), lineno, "non-finite component")
            if not row.any():
                raise ParseError(str(path), lineno, "all-zero vector")
            if tok in seen:
                dupes += 1
                continue
            seen.add(tok)
            tokens.append(tok)
            rows.append(row)
    if not tokens:
        raise ParseError(str(path), 0, "no vector rows")
    if dupes:
        logger.warning("%s: %d duplicate tokens dropped (first occurrence kept)",
                       path, dupes)
    return WordVectorTable(tokens, np.vstack(rows), duplicate_count=dupes)


def _load_binary(path: Path) -> WordVectorTable:
    name = str(path)
    with open(path, "rb") as f:
        binio.check_header(f, binio.MAGIC_WVEC, name)
        dim = binio.read_u32(f, name, "dim")
        count = binio.read_u64(f, name, "count")
        if dim == 0:
            raise FormatError(f"{name}: zero dimension")
        tokens: list[str] = []
        rows: list[np.ndarray] = []
        seen: set[str] = set()
        dupes = 0
        for i in range(count):
            raw_tok = binio.read_token(f, name, f"token #{i}")
            try:
                tok = normalize(raw_tok)
            except ValueError as exc:
                raise FormatError(f"{name}: record #{i}: {exc}") from None
            row = binio.read_f32_array(f, dim, name, f"vector #{i}")
            if not np.all(np.isfinite(row)):
                raise FormatError(f"{name}: record #{i}: non-finite component")
            if not row.any():
                raise FormatError(f"{name}: record #{i}: all-zero vector")
            if tok in seen:
                dupes += 1
                continue
            seen.add(tok)
            tokens.append(tok)
            rows.append(row)
        binio.check_eof(f, name)
    if not tokens:
        raise FormatError(f"{name}: empty table")
    if dupes:
        logger.warning("%s: %d duplicate tokens dropped (first occurrence kept)",
                       name, dupes)
    return WordVectorTable(tokens, np.vstack(rows), duplicate_count=dupes)


def write_word_vectors(table: WordVectorTable, path: str | Path,
                       format: str = "binary") -> None:
    """Persist ``table`` at ``path`` in the given format."""
    path = Path(path)
    if format == "binary":
        with open(path, "wb") as f:
            f.write(binio.MAGIC_WVEC)
            f.write(struct.pack("<I", binio.FORMAT_VERSION))
            f.write(struct.pack("<I", table.dim))
            f.write(struct.pack("<Q", len(table)))
            for i, tok in enumerate(table._tokens):
                binio.write_token(f, tok)
                f.write(table._matrix[i].astype("<f4").tobytes())
    elif format == "text":
        with open(path, "w", encoding="utf-8") as f:
            for i, tok in enumerate(table._tokens):
                comps = " ".join(repr(float(x)) for x in table._matrix[i])
                f.write(f"{tok} {comps}\n")
    else:
        raise ValueError(f"unknown word-vector format: {format!r}")
