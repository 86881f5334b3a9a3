"""Accuracy evaluation broken down by confidence bucket.

Each question lands in exactly one half-open confidence bucket (the last
bucket is closed above); questions whose confidence cannot be computed
(typically a missing query embedding) are reported in a separate
"unscored" row instead of being dropped. Reports built from persisted
verdict records and from in-memory runs share one code path, so the two
always agree.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .datasets import AnalogyQuestion, Dataset
from .errors import RelchainError
from .informativeness import InformativenessClassifier
from .relations import RelationStore
from .solver import SolverVerdict, confidence

DEFAULT_BUCKETS = (0.0, 0.25, 0.5, 0.75, 1.0)


def bucket_index(conf: float, bounds: Sequence[float] = DEFAULT_BUCKETS) -> int:
    """Index of the half-open bucket holding ``conf``; last bucket closed."""
    if len(bounds) < 2:
        raise ValueError("need at least two bucket bounds")
    clamped = min(max(conf, bounds[0]), bounds[-1])
    for i in range(len(bounds) - 2):
        if clamped < bounds[i + 1]:
            return i
    return len(bounds) - 2


def bucket_label(bounds: Sequence[float], i: int) -> str:
    closing = "]" if i == len(bounds) - 2 else ")"
    return f"[{bounds[i]:.2f},{bounds[i + 1]:.2f}{closing}"


@dataclass
class BucketStat:
    label: str
    count: int = 0
    correct: int = 0

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.count if self.count else None


@dataclass
class EvalReport:
    """Per-dataset accuracy split over confidence buckets."""

    dataset: str
    method: str
    bounds: tuple[float, ...]
    buckets: list[BucketStat]
    unscored: BucketStat

    @property
    def total(self) -> int:
        return sum(b.count for b in self.buckets) + self.unscored.count

    @property
    def correct(self) -> int:
        return sum(b.correct for b in self.buckets) + self.unscored.correct

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.total if self.total else None


@dataclass(frozen=True)
class QuestionRecord:
    """One solved (or failed) question, as persisted to verdict JSONL.

    ``method`` is the harness-level label used for grouping;
    ``solver_method`` keeps the solver's own string, which for hybrids
    names the branch that fired.
    """

    dataset: str
    qid: str
    method: str
    gold: int
    chosen: int | None
    confidence: float | None
    scores: tuple[float, ...] = ()
    fallback_used: bool = False
    query_fallback: bool = False
    candidate_fallbacks: tuple[int, ...] = ()
    degenerate: bool = False
    explanation: tuple[str, str] | None = None
    error: str | None = None
    solver_method: str | None = None

    @property
    def correct(self) -> bool:
        return self.chosen is not None and self.chosen == self.gold

    def to_json(self) -> str:
        obj = {
            "dataset": self.dataset, "id": self.qid, "method": self.method,
            "gold": self.gold, "chosen": self.chosen, "confidence": self.confidence,
            "scores": list(self.scores), "fallback_used": self.fallback_used,
            "query_fallback": self.query_fallback,
            "candidate_fallbacks": list(self.candidate_fallbacks),
            "degenerate": self.degenerate,
            "explanation": list(self.explanation) if self.explanation else None,
            "error": self.error,
            "solver_method": self.solver_method,
        }
        return json.dumps(obj, allow_nan=True)

    @classmethod
    def from_obj(cls, obj: dict) -> "QuestionRecord":
        return cls(
            dataset=obj["dataset"], qid=str(obj["id"]), method=obj["method"],
            gold=int(obj["gold"]),
            chosen=None if obj.get("chosen") is None else int(obj["chosen"]),
            confidence=obj.get("confidence"),
            scores=tuple(obj.get("scores") or ()),
            fallback_used=bool(obj.get("fallback_used", False)),
            query_fallback=bool(obj.get("query_fallback", False)),
            candidate_fallbacks=tuple(obj.get("candidate_fallbacks") or ()),
            degenerate=bool(obj.get("degenerate", False)),
            explanation=tuple(obj["explanation"]) if obj.get("explanation") else None,
            error=obj.get("error"),
            solver_method=obj.get("solver_method"),
        )


def write_records(records: Iterable[QuestionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(rec.to_json() + "\n")


def read_records(path: str | Path) -> list[QuestionRecord]:
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                records.append(QuestionRecord.from_obj(json.loads(line)))
    return records


def report_from_records(records: Sequence[QuestionRecord], dataset: str,
                        method: str, bounds: Sequence[float] = DEFAULT_BUCKETS
                        ) -> EvalReport:
    """Bucket records by confidence; None confidence goes to unscored."""
    bounds = tuple(bounds)
    buckets = [BucketStat(bucket_label(bounds, i)) for i in range(len(bounds) - 1)]
    unscored = BucketStat("unscored")
    for rec in records:
        slot = unscored if rec.confidence is None else buckets[bucket_index(rec.confidence, bounds)]
        slot.count += 1
        slot.correct += int(rec.correct)
    return EvalReport(dataset=dataset, method=method, bounds=bounds,
                      buckets=buckets, unscored=unscored)


@dataclass
class EvalResult:
    report: EvalReport
    records: list[QuestionRecord] = field(default_factory=list)


def evaluate(ds: Dataset, solver_fn: Callable[[AnalogyQuestion], SolverVerdict],
             store: RelationStore, clf: InformativenessClassifier | None = None,
             bounds: Sequence[float] = DEFAULT_BUCKETS, threads: int = 1,
             method: str = "custom") -> EvalResult:
    """Run ``solver_fn`` over a dataset and bucket accuracy by confidence.

    Confidence is always the relbert-based score, whatever the method
    under evaluation, so buckets are comparable across methods. Solver
    errors leave the question unanswered (counted incorrect); confidence
    errors send it to the unscored row. Results are collected by question
    index, so any thread count yields identical output.
    """
    def solve_one(item: tuple[int, AnalogyQuestion]) -> QuestionRecord:
        i, q = item
        conf: float | None = None
        if clf is not None:
            try:
                conf = confidence(q, store, clf)
            except RelchainError:
                conf = None
        verdict: SolverVerdict | None = None
        error: str | None = None
        try:
            verdict = solver_fn(q)
        except RelchainError as exc:
            error = str(exc)
        if verdict is None:
            return QuestionRecord(dataset=ds.name, qid=q.qid or str(i), method=method,
                                  gold=q.gold, chosen=None, confidence=conf, error=error)
        return QuestionRecord(
            dataset=ds.name, qid=q.qid or str(i), method=method, gold=q.gold,
            chosen=verdict.chosen, confidence=conf, scores=verdict.scores,
            fallback_used=verdict.fallback_used, query_fallback=verdict.query_fallback,
            candidate_fallbacks=verdict.candidate_fallbacks,
            degenerate=verdict.degenerate, explanation=verdict.explanation,
            solver_method=verdict.method)

    items = list(enumerate(ds.questions))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(solve_one, items))
    else:
        records = [solve_one(item) for item in items]
    report = report_from_records(records, ds.name, method, bounds)
    return EvalResult(report=report, records=records)


# --- aggregation and rendering ------------------------------------------

def micro_report(reports: Sequence[EvalReport]) -> EvalReport:
    """Pool questions across datasets (each question weighs the same)."""
    if not reports:
        raise ValueError("no reports to aggregate")
    bounds = reports[0].bounds
    if any(r.bounds != bounds for r in reports):
        raise ValueError("reports use different bucket bounds")
    method = reports[0].method if len({r.method for r in reports}) == 1 else "mixed"
    buckets = [BucketStat(bucket_label(bounds, i)) for i in range(len(bounds) - 1)]
    unscored = BucketStat("unscored")
    for rep in reports:
        for agg, b in zip(buckets, rep.buckets):
            agg.count += b.count
            agg.correct += b.correct
        unscored.count += rep.unscored.count
        unscored.correct += rep.unscored.correct
    return EvalReport(dataset="micro-avg", method=method, bounds=bounds,
                      buckets=buckets, unscored=unscored)


@dataclass
class MacroRow:
    label: str
    count: int
    accuracy: float | None


def macro_rows(reports: Sequence[EvalReport]) -> list[MacroRow]:
    """Unweighted mean of per-dataset accuracies (each dataset weighs the same).

    Buckets empty in a dataset are left out of that bucket's mean.
    """
    if not reports:
        raise ValueError("no reports to aggregate")
    bounds = reports[0].bounds
    if any(r.bounds != bounds for r in reports):
        raise ValueError("reports use different bucket bounds")
    rows: list[MacroRow] = []
    n_buckets = len(bounds) - 1
    for i in range(n_buckets):
        stats = [r.buckets[i] for r in reports]
        accs = [s.accuracy for s in stats if s.accuracy is not None]
        rows.append(MacroRow(bucket_label(bounds, i), sum(s.count for s in stats),
                             sum(accs) / len(accs) if accs else None))
    accs = [r.accuracy for r in reports if r.accuracy is not None]
    rows.append(MacroRow("overall", sum(r.total for r in reports),
                         sum(accs) / len(accs) if accs else None))
    return rows


def _fmt_acc(acc: float | None) -> str:
    return "-" if acc is None else f"{acc * 100:6.1f}"


def render_text(reports: Sequence[EvalReport], aggregates: bool = True) -> str:
    """Aligned text table over all reports, plus macro/micro when useful."""
    lines = []
    header = f"{'dataset':<16} {'method':<28} {'bucket':<14} {'count':>6} {'acc%':>7}"
    lines.append(header)
    lines.append("-" * len(header))
    for rep in reports:
        rows = rep.buckets + ([rep.unscored] if rep.unscored.count else [])
        for b in rows:
            lines.append(f"{rep.dataset:<16} {rep.method:<28} {b.label:<14} "
                         f"{b.count:>6} {_fmt_acc(b.accuracy):>7}")
        lines.append(f"{rep.dataset:<16} {rep.method:<28} {'overall':<14} "
                     f"{rep.total:>6} {_fmt_acc(rep.accuracy):>7}")
    if aggregates and len(reports) > 1:
        micro = micro_report(reports)
        rows = micro.buckets + ([micro.unscored] if micro.unscored.count else [])
        for b in rows:
            lines.append(f"{micro.dataset:<16} {micro.method:<28} {b.label:<14} "
                         f"{b.count:>6} {_fmt_acc(b.accuracy):>7}")
        lines.append(f"{micro.dataset:<16} {micro.method:<28} {'overall':<14} "
                     f"{micro.total:>6} {_fmt_acc(micro.accuracy):>7}")
        for row in macro_rows(reports):
            lines.append(f"{'macro-avg':<16} {micro.method:<28} {row.label:<14} "
                         f"{row.count:>6} {_fmt_acc(row.accuracy):>7}")
    return "\n".join(lines)


def render_csv(reports: Sequence[EvalReport], aggregates: bool = True) -> str:
    """CSV with columns dataset, bucket, count, accuracy, method."""
    lines = ["dataset,bucket,count,accuracy,method"]

    def acc_cell(acc: float | None) -> str:
        return "" if acc is None else f"{acc:.6f}"

    def emit(dataset: str, method: str, rows) -> None:
        for label, count, acc in rows:
            lines.append(f"{dataset},{label},{count},{acc_cell(acc)},{method}")

    for rep in reports:
        rows = [(b.label, b.count, b.accuracy) for b in rep.buckets]
        if rep.unscored.count:
            rows.append((rep.unscored.label, rep.unscored.count, rep.unscored.accuracy))
        rows.append(("overall", rep.total, rep.accuracy))
        emit(rep.dataset, rep.method, rows)
    if aggregates and len(reports) > 1:
        micro = micro_report(reports)
        rows = [(b.label, b.count, b.accuracy) for b in micro.buckets]
        if micro.unscored.count:
            rows.append((micro.unscored.label, micro.unscored.count, micro.unscored.accuracy))
        rows.append(("overall", micro.total, micro.accuracy))
        emit(micro.dataset, micro.method, rows)
        emit("macro-avg", micro.method,
             [(row.label, row.count, row.accuracy) for row in macro_rows(reports)])
    return "\n".join(lines) + "\n"
