"""Condensing relation embedding chains into a single vector.

A chain for a pair (a, b) is the two relation embeddings along a 2-path
a - x - b. The condenser composes each chain through one GeLU layer,
sum-pools the results, and decodes back to embedding space:

    s_ab = decode( sum_i  gelu(A . (r_ax_i (+) r_x_ib) + b_comp) )

with (+) denoting concatenation and decode a linear layer. Training
minimizes the negative cosine between s_ab and the pair's stored relation
embedding, restricted to pairs whose embedding scores as informative.
"""
from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import erf

from . import binio
from .concepts import normalize
from .errors import DimensionMismatchError, FormatError, MissingPairError, RelchainError
from .graph import ConceptGraph, intermediates
from .informativeness import InformativenessClassifier, inf
from .relations import RelationStore
from .vectors import WordVectorTable

logger = logging.getLogger(__name__)

PUBLISHED_LATENT_DIM = 81920  # matches the released checkpoints; desk fixtures need far less
DEFAULT_LATENT_DIM = 8192

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact erf-based GeLU: x * Phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    return x * 0.5 * (1.0 + erf(x * _INV_SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    """Derivative Phi(x) + x * N(x; 0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    return cdf + x * pdf


@dataclass(frozen=True)
class Chain:
    """Two relation embeddings along a 2-path pair[0] - x - pair[1]."""

    pair: tuple[str, str]
    intermediate: str
    r_ax: np.ndarray
    r_xb: np.ndarray

    def __post_init__(self):
        if self.r_ax.shape != self.r_xb.shape:
            raise DimensionMismatchError(
                f"chain legs disagree: {self.r_ax.shape} vs {self.r_xb.shape}")


@dataclass
class CondenserModel:
    """Parameters of the composition layer and the linear decoder."""

    A: np.ndarray       # (m, 2d)
    b_comp: np.ndarray  # (m,)
    W_dec: np.ndarray   # (d, m)
    b_dec: np.ndarray   # (d,)

    def __post_init__(self):
        d, m = self.dims
        if self.A.shape != (m, 2 * d) or self.b_comp.shape != (m,) \
                or self.W_dec.shape != (d, m) or self.b_dec.shape != (d,):
            raise DimensionMismatchError("inconsistent condenser parameter shapes")
        for t in (self.A, self.b_comp, self.W_dec, self.b_dec):
            if not np.all(np.isfinite(t)):
                raise ValueError("non-finite condenser parameters")

    @property
    def dims(self) -> tuple[int, int]:
        """(embedding dim d, latent dim m)."""
        return self.W_dec.shape[0], self.W_dec.shape[1]

    def copy(self) -> "CondenserModel":
        return CondenserModel(self.A.copy(), self.b_comp.copy(),
                              self.W_dec.copy(), self.b_dec.copy())


def init_model(d: int, m: int, seed: int = 0) -> CondenserModel:
    """Seeded uniform init in +-1/sqrt(fan_in) for each tensor."""
    rng = np.random.default_rng(seed)
    lim_a = 1.0 / math.sqrt(2 * d)
    lim_w = 1.0 / math.sqrt(m)
    return CondenserModel(
        A=rng.uniform(-lim_a, lim_a, size=(m, 2 * d)),
        b_comp=rng.uniform(-lim_a, lim_a, size=m),
        W_dec=rng.uniform(-lim_w, lim_w, size=(d, m)),
        b_dec=rng.uniform(-lim_w, lim_w, size=d),
    )


def compose(r1: np.ndarray, r2: np.ndarray, model: CondenserModel) -> np.ndarray:
    """Latent composition gelu(A . (r1 (+) r2) + b_comp)."""
    d, _ = model.dims
    v1 = np.asarray(r1, dtype=np.float64)
    v2 = np.asarray(r2, dtype=np.float64)
    if v1.shape != (d,) or v2.shape != (d,):
        raise DimensionMismatchError(
            f"compose expects two ({d},) vectors, got {v1.shape} and {v2.shape}")
    return gelu(model.A @ np.concatenate([v1, v2]) + model.b_comp)


def decode(latent: np.ndarray, model: CondenserModel) -> np.ndarray:
    """Linear decoder back to embedding space."""
    return model.W_dec @ np.asarray(latent, dtype=np.float64) + model.b_dec


def condense(chains: Sequence[Chain], model: CondenserModel) -> np.ndarray:
    """Predicted relation embedding from a non-empty chain set.

    Chains are summed in sorted-intermediate order so any permutation of
    the input yields bit-identical output.
    """
    if not chains:
        raise RelchainError("condense requires at least one chain")
    ordered = sorted(chains, key=lambda c: c.intermediate)
    total = np.zeros(model.dims[1])
    for chain in ordered:
        total += compose(chain.r_ax, chain.r_xb, model)
    return decode(total, model)


def chains_for_pair(a: str, b: str, graph: ConceptGraph, store: RelationStore,
                    table: WordVectorTable | None = None, smoothing: bool = True,
                    cap: int = 50, clf: InformativenessClassifier | None = None,
                    n_smooth: int = 5) -> list[Chain]:
    """Build chains for (a, b): one per intermediate with both legs stored."""
    a = normalize(a)
    b = normalize(b)
    inter = intermediates(a, b, graph, table=table, smoothing=smoothing,
                          cap=cap, store=store, clf=clf, n_smooth=n_smooth)
    chains: list[Chain] = []
    for x in inter.intermediates:
        try:
            r_ax = store.get(a, x)
            r_xb = store.get(x, b)
        except MissingPairError:
            continue
        chains.append(Chain((a, b), x, r_ax, r_xb))
    return chains


# --- training ----------------------------------------------------------

@dataclass
class TrainConfig:
    """Optimizer and data-selection settings for condenser training."""

    lr: float = 0.0025
    epochs: int = 10
    batch_size: int = 256
    seed: int = 0
    inf_threshold: float = 0.75
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        if not 0.0 <= self.inf_threshold <= 1.0:
            raise ValueError("inf_threshold must lie in [0, 1]")


@dataclass
class TrainResult:
    """Trained model plus the per-epoch loss log."""

    model: CondenserModel
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    n_train: int = 0
    n_val: int = 0
    skipped: dict[str, int] = field(default_factory=dict)

    def sidecar(self, cfg: TrainConfig, latent_dim: int) -> dict:
        return {
            "config": {
                "lr": cfg.lr, "epochs": cfg.epochs, "batch_size": cfg.batch_size,
                "seed": cfg.seed, "inf_threshold": cfg.inf_threshold,
                "beta1": cfg.beta1, "beta2": cfg.beta2, "eps": cfg.eps,
                "latent_dim": latent_dim,
            },
            "n_train": self.n_train,
            "n_val": self.n_val,
            "skipped": self.skipped,
            "train_losses": self.train_losses,
            "val_losses": self.val_losses,
        }


TrainItem = tuple[list[Chain], np.ndarray]  # (chains, target embedding)


def pair_loss(chains: Sequence[Chain], target: np.ndarray,
              model: CondenserModel) -> float:
    """Single negative-cosine loss term, in [-1, 1]."""
    s = condense(chains, model)
    t = np.asarray(target, dtype=np.float64)
    return float(-(s @ t) / (np.linalg.norm(s) * np.linalg.norm(t)))


def batch_loss_and_grads(items: Sequence[TrainItem], model: CondenserModel
                         ) -> tuple[float, dict[str, np.ndarray]]:
    """Loss summed over ``items`` and its analytic parameter gradients.

    The loss is the plain sum of -cos(s_ab, r_ab) terms; callers that want
    a mean divide both outputs by len(items).
    """
    d, m = model.dims
    grads = {
        "A": np.zeros((m, 2 * d)),
        "b_comp": np.zeros(m),
        "W_dec": np.zeros((d, m)),
        "b_dec": np.zeros(d),
    }
    total_loss = 0.0
    for chains, target in items:
        if not chains:
            raise RelchainError("training item has no chains")
        ordered = sorted(chains, key=lambda c: c.intermediate)
        U = np.stack([
            np.concatenate([np.asarray(c.r_ax, dtype=np.float64),
                            np.asarray(c.r_xb, dtype=np.float64)])
            for c in ordered
        ])                                  # (n, 2d)
        Z = U @ model.A.T + model.b_comp    # (n, m)
        Hs = gelu(Z)
        H = Hs.sum(axis=0)                  # (m,)
        s = model.W_dec @ H + model.b_dec   # (d,)

        t = np.asarray(target, dtype=np.float64)
        ns = np.linalg.norm(s)
        nt = np.linalg.norm(t)
        dot = s @ t
        total_loss += -dot / (ns * nt)

        g_s = -(t / (ns * nt) - dot * s / (ns ** 3 * nt))
        grads["W_dec"] += np.outer(g_s, H)
        grads["b_dec"] += g_s
        g_h = model.W_dec.T @ g_s           # (m,)
        g_z = gelu_grad(Z) * g_h            # (n, m), broadcast over chains
        grads["A"] += g_z.T @ U
        grads["b_comp"] += g_z.sum(axis=0)
    return total_loss, grads


class _Adam:
    """Minimal Adam with bias correction, one state slot per tensor."""

    def __init__(self, cfg: TrainConfig, shapes: dict[str, tuple[int, ...]]):
        self.cfg = cfg
        self.t = 0
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        cfg = self.cfg
        self.t += 1
        for key, g in grads.items():
            self.m[key] = cfg.beta1 * self.m[key] + (1 - cfg.beta1) * g
            self.v[key] = cfg.beta2 * self.v[key] + (1 - cfg.beta2) * g * g
            m_hat = self.m[key] / (1 - cfg.beta1 ** self.t)
            v_hat = self.v[key] / (1 - cfg.beta2 ** self.t)
            params[key] -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


def prepare_training_items(pairs: Iterable[tuple[str, str]], graph: ConceptGraph,
                           store: RelationStore, clf: InformativenessClassifier,
                           cfg: TrainConfig, table: WordVectorTable | None = None,
                           smoothing: bool = True, cap: int = 50,
                           n_smooth: int = 5) -> tuple[list[TrainItem], dict[str, int]]:
    """Select trainable pairs: informative stored embedding plus >= 1 chain."""
    items: list[TrainItem] = []
    skipped = {"missing_embedding": 0, "uninformative": 0, "no_chains": 0}
    seen: set[tuple[str, str]] = set()
    for a, b in pairs:
        pair = (normalize(a), normalize(b))
        if pair in seen:
            continue
        seen.add(pair)
        try:
            r = store.get(*pair)
        except MissingPairError:
            skipped["missing_embedding"] += 1
            continue
        if not inf(r, clf) > cfg.inf_threshold:
            skipped["uninformative"] += 1
            continue
        chains = chains_for_pair(*pair, graph, store, table=table,
                                 smoothing=smoothing, cap=cap, clf=clf,
                                 n_smooth=n_smooth)
        if not chains:
            skipped["no_chains"] += 1
            continue
        items.append((chains, r.astype(np.float64)))
    return items, skipped


def train_condenser(pairs: Iterable[tuple[str, str]], graph: ConceptGraph,
                    store: RelationStore, clf: InformativenessClassifier,
                    cfg: TrainConfig | None = None, latent_dim: int = DEFAULT_LATENT_DIM,
                    table: WordVectorTable | None = None, smoothing: bool = True,
                    cap: int = 50, n_smooth: int = 5) -> TrainResult:
    """Train the condenser with Adam on minibatches of negative-cosine loss.

    10% of the retained pairs (after a seeded shuffle) are held out for
    validation; the returned log has one train and one validation entry
    per epoch. Deterministic for a fixed config and seed.
    """
    cfg = cfg or TrainConfig()
    items, skipped = prepare_training_items(pairs, graph, store, clf, cfg,
                                            table=table, smoothing=smoothing,
                                            cap=cap, n_smooth=n_smooth)
    if not items:
        raise RelchainError("no trainable pairs after informativeness/chain filtering")

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(items))
    shuffled = [items[i] for i in perm]
    n_val = len(shuffled) // 10
    val_items = shuffled[len(shuffled) - n_val:]
    train_items = shuffled[:len(shuffled) - n_val]

    d = store.dim
    model = init_model(d, latent_dim, seed=cfg.seed)
    params = {"A": model.A, "b_comp": model.b_comp,
              "W_dec": model.W_dec, "b_dec": model.b_dec}
    adam = _Adam(cfg, {k: p.shape for k, p in params.items()})

    result = TrainResult(model=model, n_train=len(train_items),
                         n_val=len(val_items), skipped=skipped)
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train_items))
        epoch_loss = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            batch = [train_items[i] for i in order[lo:lo + cfg.batch_size]]
            loss, grads = batch_loss_and_grads(batch, model)
            scale = 1.0 / len(batch)
            adam.step(params, {k: g * scale for k, g in grads.items()})
            epoch_loss += loss
        result.train_losses.append(epoch_loss / max(len(train_items), 1))
        if val_items:
            val_loss = sum(pair_loss(c, t, model) for c, t in val_items) / len(val_items)
            result.val_losses.append(val_loss)
        else:
            result.val_losses.append(math.nan)
        logger.info("condenser epoch %d: train %.4f val %s", epoch + 1,
                    result.train_losses[-1],
                    f"{result.val_losses[-1]:.4f}" if val_items else "n/a")
    return result


# --- persistence -------------------------------------------------------

def write_condenser(model: CondenserModel, path: str | Path,
                    metadata: dict | None = None) -> None:
    """Persist as a COND binary; optional JSON sidecar at ``<path>.json``."""
    d, m = model.dims
    path = Path(path)
    with open(path, "wb") as f:
        f.write(binio.MAGIC_COND)
        f.write(struct.pack("<I", binio.FORMAT_VERSION))
        f.write(struct.pack("<I", d))
        f.write(struct.pack("<I", m))
        for tensor in (model.A, model.b_comp, model.W_dec, model.b_dec):
            f.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    if metadata is not None:
        sidecar = path.with_name(path.name + ".json")
        sidecar.write_text(json.dumps(metadata, indent=2) + "\n", encoding="utf-8")


def load_condenser(path: str | Path) -> CondenserModel:
    """Load a COND binary checkpoint (parameters upcast to float64)."""
    name = str(path)
    with open(path, "rb") as f:
        binio.check_header(f, binio.MAGIC_COND, name)
        d = binio.read_u32(f, name, "d")
        m = binio.read_u32(f, name, "m")
        if d == 0 or m == 0:
            raise FormatError(f"{name}: zero dimension")
        A = binio.read_f32_array(f, m * 2 * d, name, "A").reshape(m, 2 * d)
        b_comp = binio.read_f32_array(f, m, name, "b_comp")
        W_dec = binio.read_f32_array(f, d * m, name, "W_dec").reshape(d, m)
        b_dec = binio.read_f32_array(f, d, name, "b_dec")
        binio.check_eof(f, name)
    try:
        return CondenserModel(A=A.astype(np.float64), b_comp=b_comp.astype(np.float64),
                              W_dec=W_dec.astype(np.float64), b_dec=b_dec.astype(np.float64))
    except ValueError as exc:
        raise FormatError(f"{name}: {exc}") from None
