"""Informativeness scoring of relation embeddings.

A logistic regression classifier, trained from scratch on labeled word
pairs, estimates the probability that a relation embedding encodes a
specific relationship rather than noise. Negatives can be synthesized
from positives by re-pairing left and right words.
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from . import binio
from .concepts import normalize
from .errors import DimensionMismatchError, FormatError, ParseError, RelchainError
from .relations import RelationStore

logger = logging.getLogger(__name__)

_PROB_FLOOR = 1e-15  # keeps scores strictly inside (0, 1)
_MAX_REJECTIONS = 100


@dataclass(frozen=True)
class LabeledPair:
    """An ordered word pair tagged as related (1) or unrelated (0)."""

    a: str
    b: str
    label: int

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError(f"degenerate pair ({self.a}, {self.b})")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


@dataclass
class ClassifierConfig:
    """Hyperparameters for full-batch logistic regression training."""

    lr: float = 0.05
    epochs: int = 500
    l2: float = 1e-3
    seed: int = 0


@dataclass
class InformativenessClassifier:
    """Linear scorer: inf(r) = sigmoid(weights . r + bias)."""

    weights: np.ndarray
    bias: float
    loss_log: list[float] = field(default_factory=list, repr=False)

    @property
    def dim(self) -> int:
        return self.weights.size


def load_labeled_pairs(path: str | Path) -> list[LabeledPair]:
    """Read a TSV of ``word_a<TAB>word_b<TAB>label`` rows.

    Lines starting with ``#`` and blank lines are skipped.
    """
    out: list[LabeledPair] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split("\t")
            if len(parts) != 3:
                raise ParseError(str(path), lineno,
                                 f"expected 3 tab-separated columns, found {len(parts)}")
            try:
                label = int(parts[2])
                out.append(LabeledPair(normalize(parts[0]), normalize(parts[1]), label))
            except ValueError as exc:
                raise ParseError(str(path), lineno, str(exc)) from None
    return out


def corrupt_negatives(positives: Sequence[LabeledPair], seed: int) -> list[LabeledPair]:
    """Synthesize one negative per positive by cross-pairing words.

    Each negative keeps a positive's left word and takes the right word of
    a different positive, drawn uniformly; draws that recreate a positive
    pair (or a degenerate one) are rejected. A slot that fails 100 draws
    is skipped and logged.
    """
    if len(positives) < 2:
        raise ValueError("need at least 2 positives to corrupt")
    pos_set = {(p.a, p.b) for p in positives}
    rng = np.random.default_rng(seed)
    out: list[LabeledPair] = []
    skipped = 0
    for i, pos in enumerate(positives):
        for _ in range(_MAX_REJECTIONS):
            j = int(rng.integers(len(positives) - 1))
            if j >= i:
                j += 1
            cand = (pos.a, positives[j].b)
            if cand in pos_set or cand[0] == cand[1]:
                continue
            out.append(LabeledPair(cand[0], cand[1], 0))
            break
        else:
            skipped += 1
    if skipped:
        logger.warning("corrupt_negatives: skipped %d slots after %d rejections each",
                       skipped, _MAX_REJECTIONS)
    return out


def _features(data: Sequence[LabeledPair], store: RelationStore) -> tuple[np.ndarray, np.ndarray]:
    missing = [(p.a, p.b) for p in data if (p.a, p.b) not in store]
    if missing:
        shown = ", ".join(f"({a}, {b})" for a, b in missing[:10])
        more = "" if len(missing) <= 10 else f" and {len(missing) - 10} more"
        raise RelchainError(f"pairs missing from relation store: {shown}{more}")
    X = np.stack([store.get(p.a, p.b).astype(np.float64) for p in data])
    y = np.array([p.label for p in data], dtype=np.float64)
    return X, y


def regularized_log_loss(weights: np.ndarray, bias: float, X: np.ndarray,
                         y: np.ndarray, l2: float) -> float:
    """Mean binary log loss plus 0.5 * l2 * ||weights||^2 (bias unpenalized)."""
    z = X @ weights + bias
    # softplus-based form, stable for large |z|
    per_example = np.logaddexp(0.0, -z) * y + np.logaddexp(0.0, z) * (1.0 - y)
    return float(per_example.mean() + 0.5 * l2 * weights @ weights)


def log_loss_gradients(weights: np.ndarray, bias: float, X: np.ndarray,
                       y: np.ndarray, l2: float) -> tuple[np.ndarray, float]:
    """Analytic gradient of :func:`regularized_log_loss`."""
    p = expit(X @ weights + bias)
    resid = p - y
    grad_w = X.T @ resid / len(y) + l2 * weights
    grad_b = float(resid.mean())
    return grad_w, grad_b


def train_classifier(data: Sequence[LabeledPair], store: RelationStore,
                     cfg: ClassifierConfig | None = None) -> InformativenessClassifier:
    """Fit the classifier by full-batch gradient descent from zero init.

    The loss is convex, so the zero initialization only pins determinism.
    Raises if any pair lacks a stored embedding or only one label class
    is present.
    """
    cfg = cfg or ClassifierConfig()
    X, y = _features(data, store)
    labels = set(int(v) for v in y)
    if labels != {0, 1}:
        raise RelchainError(f"training data must contain both classes, found {sorted(labels)}")
    w = np.zeros(store.dim)
    b = 0.0
    log: list[float] = []
    for _ in range(cfg.epochs):
        grad_w, grad_b = log_loss_gradients(w, b, X, y, cfg.l2)
        w = w - cfg.lr * grad_w
        b = b - cfg.lr * grad_b
        log.append(regularized_log_loss(w, b, X, y, cfg.l2))
    return InformativenessClassifier(weights=w, bias=b, loss_log=log)


def inf(r: np.ndarray, clf: InformativenessClassifier) -> float:
    """Probability in (0, 1) that ``r`` encodes an informative relation."""
    vec = np.asarray(r, dtype=np.float64)
    if vec.shape != (clf.dim,):
        raise DimensionMismatchError(
            f"embedding has shape {vec.shape}, classifier expects ({clf.dim},)")
    p = float(expit(clf.weights @ vec + clf.bias))
    return min(max(p, _PROB_FLOOR), 1.0 - _PROB_FLOOR)


def predict_accuracy(clf: InformativenessClassifier, data: Sequence[LabeledPair],
                     store: RelationStore) -> float:
    """Training-set accuracy at the 0.5 decision threshold."""
    X, y = _features(data, store)
    pred = (expit(X @ clf.weights + clf.bias) >= 0.5).astype(np.float64)
    return float((pred == y).mean())


def write_classifier(clf: InformativenessClassifier, path: str | Path) -> None:
    """Persist the classifier as an INFC binary checkpoint."""
    with open(path, "wb") as f:
        f.write(binio.MAGIC_INFC)
        f.write(struct.pack("<I", binio.FORMAT_VERSION))
        f.write(struct.pack("<I", clf.dim))
        f.write(struct.pack("<d", clf.bias))
        f.write(np.ascontiguousarray(clf.weights, dtype="<f8").tobytes())


def load_classifier(path: str | Path) -> InformativenessClassifier:
    """Load an INFC binary checkpoint."""
    name = str(path)
    with open(path, "rb") as f:
        binio.check_header(f, binio.MAGIC_INFC, name)
        dim = binio.read_u32(f, name, "dim")
        if dim == 0:
            raise FormatError(f"{name}: zero dimension")
        bias = binio.read_f64(f, name, "bias")
        weights = binio.read_f64_array(f, dim, name, "weights")
        binio.check_eof(f, name)
    if not np.all(np.isfinite(weights)) or not np.isfinite(bias):
        raise FormatError(f"{name}: non-finite parameters")
    return InformativenessClassifier(weights=weights, bias=bias)
