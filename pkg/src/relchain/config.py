"""Runtime configuration: one JSON file mirroring every tunable default.

The CLI reads ``--config`` first, then the ``RELCHAIN_CONFIG`` environment
variable, then falls back to the defaults below. Unknown keys are
rejected so that typos do not silently run with defaults.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .condenser import DEFAULT_LATENT_DIM, TrainConfig
from .errors import RelchainError
from .evaluate import DEFAULT_BUCKETS
from .graph import DEFAULT_EXCLUSIONS
from .informativeness import ClassifierConfig

ENV_VAR = "RELCHAIN_CONFIG"


@dataclass
class Config:
    seed: int = 0
    threads: int = 1
    language: str = "en"
    excluded_relations: tuple[str, ...] = tuple(sorted(DEFAULT_EXCLUSIONS))
    mlp_top_k: int = 250
    mlp_threshold: float = 0.75
    smoothing: bool = True
    smoothing_neighbors: int = 5
    chain_cap: int = 50
    buckets: tuple[float, ...] = DEFAULT_BUCKETS
    hybrid_tau: float = 0.5
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    condenser: TrainConfig = field(default_factory=TrainConfig)
    latent_dim: int = DEFAULT_LATENT_DIM

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["excluded_relations"] = list(self.excluded_relations)
        out["buckets"] = list(self.buckets)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "Config":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise RelchainError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(obj)
        if "excluded_relations" in kwargs:
            kwargs["excluded_relations"] = tuple(kwargs["excluded_relations"])
        if "buckets" in kwargs:
            kwargs["buckets"] = tuple(float(x) for x in kwargs["buckets"])
        for key, sub_cls in (("classifier", ClassifierConfig), ("condenser", TrainConfig)):
            if key in kwargs and isinstance(kwargs[key], dict):
                sub_known = {f.name for f in dataclasses.fields(sub_cls)}
                sub_unknown = set(kwargs[key]) - sub_known
                if sub_unknown:
                    raise RelchainError(f"unknown {key} config keys: {sorted(sub_unknown)}")
                kwargs[key] = sub_cls(**kwargs[key])
        return cls(**kwargs)


def load_config(path: str | Path | None = None) -> Config:
    """Load from ``path``, else from $RELCHAIN_CONFIG, else defaults."""
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    if path is None:
        return Config()
    try:
        with open(path, encoding="utf-8") as f:
            obj = json.load(f)
    except json.JSONDecodeError as exc:
        raise RelchainError(f"{path}: invalid config JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise RelchainError(f"{path}: config must be an object")
    return Config.from_dict(obj)
