from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # oracles.py / planted.py

from relchain.relations import RelationStore
from relchain.vectors import WordVectorTable


def make_table(tokens: list[str], dim: int, rng: np.random.Generator) -> WordVectorTable:
    mat = rng.normal(size=(len(tokens), dim)).astype(np.float32)
    return WordVectorTable(tokens, mat)


def make_store(pairs: list[tuple[str, str]], dim: int,
               rng: np.random.Generator) -> RelationStore:
    mat = rng.normal(size=(len(pairs), dim)).astype(np.float32)
    return RelationStore(pairs, mat)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
