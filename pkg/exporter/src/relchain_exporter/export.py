"""Export drivers: ordered word pairs to RELC, static vectors to WVEC."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoders import make_encoder, Pair
from .formats import MAGIC_RELC, MAGIC_WVEC, _PatchedCountWriter, normalize

logger = logging.getLogger(__name__)


class ExportError(Exception):
    pass


@dataclass
class ExportManifest:
    """What to export: model, ordered pairs, destination, batching, dim."""

    model: str
    pairs: list[Pair]
    out: Path
    batch_size: int = 64
    dim: int = 1024

    def __post_init__(self):
        self.out = Path(self.out)
        if not self.pairs:
            raise ExportError("manifest has no pairs")
        if self.batch_size <= 0:
            raise ExportError("batch size must be positive")


def load_pairs_tsv(path: str | Path) -> list[Pair]:
    """2-column TSV of ordered pairs; ``#`` comments and blanks skipped."""
    pairs: list[Pair] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split("\t")
            if len(parts) < 2:
                raise ExportError(f"{path}:{lineno}: expected 2 tab-separated columns")
            try:
                pairs.append((normalize(parts[0]), normalize(parts[1])))
            except ValueError as exc:
                raise ExportError(f"{path}:{lineno}: {exc}") from None
    if not pairs:
        raise ExportError(f"{path}: no pairs")
    return pairs


@dataclass
class ExportStats:
    written: int = 0
    skipped: list[Pair] = field(default_factory=list)
    duplicates: int = 0


def export_relations(manifest: ExportManifest, encoder=None) -> ExportStats:
    """Write one RELC record per ordered pair, batched through the encoder.

    Pairs the encoder declines (tokenizer limits) are skipped and logged.
    Repeated ordered pairs keep their first occurrence. Identical
    manifests produce byte-identical files.
    """
    encoder = encoder if encoder is not None else make_encoder(manifest.model)
    stats = ExportStats()
    seen: set[Pair] = set()
    ordered: list[Pair] = []
    for a, b in manifest.pairs:
        pair = (normalize(a), normalize(b))
        if pair in seen:
            stats.duplicates += 1
            continue
        seen.add(pair)
        ordered.append(pair)

    with _PatchedCountWriter(manifest.out, MAGIC_RELC, manifest.dim) as writer:
        for lo in range(0, len(ordered), manifest.batch_size):
            batch = ordered[lo:lo + manifest.batch_size]
            vectors = encoder.encode(batch)
            for pair, vec in zip(batch, vectors):
                if vec is None:
                    stats.skipped.append(pair)
                    continue
                arr = np.asarray(vec, dtype=np.float32)
                if arr.shape != (manifest.dim,):
                    raise ExportError(
                        f"encoder returned dim {arr.shape} for {pair}, "
                        f"manifest expects ({manifest.dim},)")
                writer.write_token(pair[0])
                writer.write_token(pair[1])
                writer.write_vector(arr)
                writer.bump()
                stats.written += 1
    if stats.skipped:
        logger.warning("skipped %d pairs the encoder declined", len(stats.skipped))
    if stats.duplicates:
        logger.info("dropped %d duplicate ordered pairs", stats.duplicates)
    logger.info("wrote %d records to %s", stats.written, manifest.out)
    return stats


def _split_row(parts: list[str], dim: int | None) -> tuple[str, list[float]] | None:
    """Token fields + trailing float fields; None when the row is undecidable."""
    if dim is None:
        # longest run of float-parseable fields from the right
        n_floats = 0
        for field_ in reversed(parts):
            try:
                float(field_)
            except ValueError:
                break
            n_floats += 1
        if n_floats == 0 or n_floats == len(parts):
            return None
        dim = n_floats
    if len(parts) <= dim:
        return None
    token = " ".join(parts[:len(parts) - dim])
    try:
        comps = [float(x) for x in parts[len(parts) - dim:]]
    except ValueError:
        return None
    return token, comps


def export_word_vectors(src: str | Path, out: str | Path,
                        language: str = "en") -> ExportStats:
    """Convert a whitespace-separated vector dump to WVEC.

    The first row fixes the dimensionality; later rows that disagree abort
    with their row number. Tokens in term form (``/c/<lang>/<token>``) are
    kept only for the requested language. Zero or non-finite rows are
    skipped with a warning since the consumer rejects them outright.
    """
    stats = ExportStats()
    dim: int | None = None
    writer: _PatchedCountWriter | None = None
    seen: set[str] = set()
    try:
        with open(src, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                parts = line.split()
                if not parts:
                    continue
                split = _split_row(parts, dim)
                if split is None:
                    raise ExportError(f"{src}:{lineno}: malformed row")
                raw_token, comps = split
                if dim is None:
                    dim = len(comps)
                    writer = _PatchedCountWriter(out, MAGIC_WVEC, dim)
                elif len(comps) != dim:
                    raise ExportError(
                        f"{src}:{lineno}: expected {dim} components, found {len(comps)}")
                if raw_token.startswith("/c/"):
                    term = raw_token.split("/")
                    if len(term) < 4 or term[2] != language or not term[3]:
                        continue
                    raw_token = term[3]
                token = normalize(raw_token)
                arr = np.asarray(comps, dtype=np.float32)
                if not np.all(np.isfinite(arr)) or not arr.any():
                    logger.warning("%s:%d: zero or non-finite vector skipped",
                                   src, lineno)
                    stats.skipped.append((token, ""))
                    continue
                if token in seen:
                    stats.duplicates += 1
                    continue
                seen.add(token)
                writer.write_token(token)
                writer.write_vector(arr)
                writer.bump()
                stats.written += 1
    except Exception:
        if writer is not None:
            writer._f.close()
            writer.path.unlink(missing_ok=True)
        raise
    if writer is None:
        raise ExportError(f"{src}: no vector rows")
    writer.close()
    if stats.duplicates:
        logger.info("dropped %d duplicate tokens (first kept)", stats.duplicates)
    logger.info("wrote %d vectors (dim %d) to %s", stats.written, dim, out)
    return stats
