"""Relation-embedding encoders.

``RelbertEncoder`` wraps the published relation-embedding model (loaded
via the relbert package when installed, otherwise through transformers
with mean pooling). ``HashEncoder`` produces deterministic pseudo
embeddings from a cryptographic hash: no model, no randomness state, the
same bytes on every platform, which is exactly what fixture generation
and idempotence tests need. Select it with a model id of ``hash:<dim>``.
"""
from __future__ import annotations

import hashlib
import logging
import struct
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

Pair = tuple[str, str]


class EncoderError(Exception):
    """Model loading or inference failed."""


class HashEncoder:
    """Deterministic embeddings derived from sha256 of the ordered pair."""

    def __init__(self, dim: int = 1024):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim

    def _vector(self, a: str, b: str) -> np.ndarray:
        out = np.empty(self.dim, dtype=np.float32)
        filled = 0
        block = 0
        while filled < self.dim:
            digest = hashlib.sha256(f"{a}\t{b}\t{block}".encode("utf-8")).digest()
            words = struct.unpack("<8I", digest)
            for w in words:
                if filled == self.dim:
                    break
                # map uint32 to [-1, 1); never all-zero in practice
                out[filled] = (w / 2147483648.0) - 1.0
                filled += 1
            block += 1
        if not out.any():  # astronomically unlikely, but the format forbids it
            out[0] = 1.0
        return out

    def encode(self, pairs: Sequence[Pair]) -> list[np.ndarray | None]:
        return [self._vector(a, b) for a, b in pairs]


class RelbertEncoder:
    """The published fine-tuned relation encoder, loaded lazily."""

    def __init__(self, model_id: str, device: str = "cpu", max_tokens: int = 64):
        self.model_id = model_id
        self.device = device
        self.max_tokens = max_tokens
        self._impl = None

    def _load(self):
        if self._impl is not None:
            return
        try:
            from relbert import RelBERT  # published inference code, if installed
            self._impl = ("relbert", RelBERT(self.model_id))
            return
        except ImportError:
            pass
        except Exception as exc:
            raise EncoderError(f"failed to load {self.model_id}: {exc}") from exc
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
            tokenizer = AutoTokenizer.from_pretrained(self.model_id)
            model = AutoModel.from_pretrained(self.model_id).to(self.device).eval()
            self._impl = ("transformers", (torch, tokenizer, model))
        except Exception as exc:
            raise EncoderError(f"failed to load {self.model_id}: {exc}") from exc

    @property
    def dim(self) -> int:
        self._load()
        kind, impl = self._impl
        if kind == "relbert":
            return int(impl.model.config.hidden_size)
        _, _, model = impl
        return int(model.config.hidden_size)

    def encode(self, pairs: Sequence[Pair]) -> list[np.ndarray | None]:
        """One embedding per ordered pair; None for pairs past the token limit."""
        self._load()
        kind, impl = self._impl
        if kind == "relbert":
            vectors = impl.get_embedding([list(p) for p in pairs])
            return [np.asarray(v, dtype=np.float32) for v in vectors]
        torch, tokenizer, model = impl
        results: list[np.ndarray | None] = []
        texts = []
        keep = []
        for i, (a, b) in enumerate(pairs):
            text = (f"Today, I finally discovered the relation between {a} and "
                    f"{b} : {tokenizer.mask_token}")
            if len(tokenizer.encode(text)) > self.max_tokens:
                logger.warning("pair (%s, %s) exceeds the token limit; skipped", a, b)
                results.append(None)
                continue
            texts.append(text)
            keep.append(i)
            results.append(None)
        if texts:
            with torch.no_grad():
                batch = tokenizer(texts, return_tensors="pt", padding=True)
                batch = {k: v.to(self.device) for k, v in batch.items()}
                hidden = model(**batch).last_hidden_state
                mask = batch["attention_mask"].unsqueeze(-1)
                pooled = (hidden * mask).sum(1) / mask.sum(1)
            for row, i in enumerate(keep):
                results[i] = pooled[row].cpu().numpy().astype(np.float32)
        return results


def make_encoder(model_id: str, device: str = "cpu"):
    """``hash:<dim>`` selects the deterministic test encoder."""
    if model_id.startswith("hash:"):
        return HashEncoder(dim=int(model_id.split(":", 1)[1]))
    return RelbertEncoder(model_id, device=device)
