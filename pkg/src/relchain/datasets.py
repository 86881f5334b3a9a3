"""Multiple-choice analogy question datasets.

Input is JSON-lines with the field names used by the public analogy
question dumps: ``stem`` (the query pair), ``choice`` (candidate pairs),
``answer`` (gold index). Concepts are normalized on load.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .concepts import normalize
from .errors import ParseError


@dataclass(frozen=True)
class AnalogyQuestion:
    """A query pair, ordered candidate pairs, and the gold index."""

    query: tuple[str, str]
    candidates: tuple[tuple[str, str], ...]
    gold: int
    qid: str = ""

    def __post_init__(self):
        if len(self.candidates) < 2:
            raise ValueError("a question needs at least 2 candidates")
        if len(set(self.candidates)) != len(self.candidates):
            raise ValueError("candidates must be distinct")
        if not 0 <= self.gold < len(self.candidates):
            raise ValueError(f"gold index {self.gold} out of range "
                             f"for {len(self.candidates)} candidates")


@dataclass(frozen=True)
class Dataset:
    """A named, non-empty list of well-formed questions."""

    name: str
    questions: tuple[AnalogyQuestion, ...]

    def __post_init__(self):
        if not self.questions:
            raise ValueError(f"dataset {self.name!r} is empty")

    def __len__(self) -> int:
        return len(self.questions)

    @property
    def mean_candidates(self) -> float:
        return sum(len(q.candidates) for q in self.questions) / len(self.questions)


def _pair(obj, what: str) -> tuple[str, str]:
    if not isinstance(obj, (list, tuple)) or len(obj) != 2 \
            or not all(isinstance(w, str) for w in obj):
        raise ValueError(f"{what} must be a pair of strings")
    return (normalize(obj[0]), normalize(obj[1]))


def load_dataset(path: str | Path, name: str | None = None) -> Dataset:
    """Load a JSONL dataset; any malformed line is an error with its number."""
    path = Path(path)
    dataset_name = name if name is not None else path.stem
    questions: list[AnalogyQuestion] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(str(path), lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise ParseError(str(path), lineno, "expected a JSON object")
            try:
                stem = _pair(obj["stem"], "stem")
                choices = obj["choice"]
                if not isinstance(choices, list):
                    raise ValueError("choice must be a list of pairs")
                candidates = tuple(_pair(c, "choice entry") for c in choices)
                answer = obj["answer"]
                if not isinstance(answer, int) or isinstance(answer, bool):
                    raise ValueError("answer must be an integer index")
                questions.append(AnalogyQuestion(
                    query=stem, candidates=candidates, gold=answer,
                    qid=str(obj.get("id", len(questions)))))
            except KeyError as exc:
                raise ParseError(str(path), lineno, f"missing field {exc.args[0]!r}") from None
            except ValueError as exc:
                raise ParseError(str(path), lineno, str(exc)) from None
    if not questions:
        raise ParseError(str(path), 0, "no questions in file")
    return Dataset(name=dataset_name, questions=tuple(questions))
