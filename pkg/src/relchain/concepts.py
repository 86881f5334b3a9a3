"""Concept token normalization.

ConceptNet dumps spell multi-word concepts with underscores while analogy
datasets use spaces; every ingestion boundary funnels tokens through
:func:`normalize` so the two conventions meet in one canonical form.
"""
from __future__ import annotations

import re

_WS_RUN = re.compile(r"\s+")


def normalize(token: str) -> str:
    """Return the canonical form of a surface token.

    Lowercases, trims surrounding whitespace, and replaces internal
    whitespace runs with a single underscore. Idempotent.

    Raises:
        ValueError: if the token is empty after trimming.
    """
    canon = _WS_RUN.sub("_", token.strip()).lower()
    if not canon:
        raise ValueError(f"empty concept token: {token!r}")
    return canon
