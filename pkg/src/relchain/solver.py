"""Analogy question solvers.

A question is a query pair plus candidate pairs; every method scores the
candidates and picks the argmax, breaking ties toward the lowest index so
verdicts are reproducible. Methods:

- relbert: cosine between stored relation embeddings.
- condensed: cosine between condensed chain embeddings.
- direct: chain-set compatibility under one of three chain similarities.
- cn_types: typed 2-path matching, no embeddings involved.
- hybrid: route to a chain method below a confidence threshold, else relbert.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .concepts import normalize
from .condenser import Chain, CondenserModel, chains_for_pair, compose, condense, decode
from .datasets import AnalogyQuestion
from .errors import MissingPairError, NoRepresentationError, RelchainError
from .graph import ConceptGraph
from .informativeness import InformativenessClassifier, inf
from .relations import RelationStore
from .vectors import WordVectorTable, cosine

logger = logging.getLogger(__name__)

NEG_INF = float("-inf")


@dataclass(frozen=True)
class SolverVerdict:
    """Outcome of one solver on one question."""

    chosen: int
    method: str
    scores: tuple[float, ...]
    confidence: float | None = None
    fallback_used: bool = False
    query_fallback: bool = False
    candidate_fallbacks: tuple[int, ...] = ()
    degenerate: bool = False
    explanation: tuple[str, str] | None = None


@dataclass
class ChainContext:
    """Everything needed to build chains for a pair at solve time."""

    graph: ConceptGraph
    store: RelationStore
    clf: InformativenessClassifier | None = None
    table: WordVectorTable | None = None
    smoothing: bool = True
    cap: int = 50
    n_smooth: int = 5
    _cache: dict[tuple[str, str], list[Chain]] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def chains(self, a: str, b: str) -> list[Chain]:
        pair = (normalize(a), normalize(b))
        with self._lock:
            cached = self._cache.get(pair)
        if cached is not None:
            return cached
        built = chains_for_pair(
            *pair, self.graph, self.store, table=self.table,
            smoothing=self.smoothing, cap=self.cap, clf=self.clf,
            n_smooth=self.n_smooth)
        with self._lock:
            return self._cache.setdefault(pair, built)


def _argmax(scores: Sequence[float]) -> int:
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best


def solve_relbert(q: AnalogyQuestion, store: RelationStore) -> SolverVerdict:
    """Pick the candidate whose embedding is most cosine-similar to the query's.

    Candidates without a stored embedding score -inf; a missing query
    embedding is an error.
    """
    r_query = store.get(*q.query)
    scores = []
    for cand in q.candidates:
        try:
            scores.append(cosine(r_query, store.get(*cand)))
        except MissingPairError:
            scores.append(NEG_INF)
    chosen = _argmax(scores)
    return SolverVerdict(chosen=chosen, method="relbert", scores=tuple(scores),
                         degenerate=scores[chosen] == NEG_INF)


def confidence(q: AnalogyQuestion, store: RelationStore,
               clf: InformativenessClassifier,
               verdict: SolverVerdict | None = None) -> float:
    """min(inf of query embedding, inf of the relbert-chosen candidate's).

    ``verdict`` may carry a precomputed relbert verdict; otherwise one is
    computed here. Missing embeddings propagate as errors.
    """
    verdict = verdict if verdict is not None else solve_relbert(q, store)
    inf_query = inf(store.get(*q.query), clf)
    inf_chosen = inf(store.get(*q.candidates[verdict.chosen]), clf)
    return min(inf_query, inf_chosen)


# --- chain similarities -------------------------------------------------

def sim1(c1: Chain, c2: Chain, model: CondenserModel | None = None) -> float:
    """Similar iff both components are: min of the two legwise cosines."""
    return min(cosine(c1.r_ax, c2.r_ax), cosine(c1.r_xb, c2.r_xb))


def sim2(c1: Chain, c2: Chain, model: CondenserModel | None = None) -> float:
    """Cosine of the two chains' composed-and-decoded embeddings."""
    if model is None:
        raise RelchainError("sim2 requires a condenser model")
    s1 = decode(compose(c1.r_ax, c1.r_xb, model), model)
    s2 = decode(compose(c2.r_ax, c2.r_xb, model), model)
    return cosine(s1, s2)


def sim3(c1: Chain, c2: Chain, model: CondenserModel | None = None) -> float:
    """Order-blind baseline: cosine of the leg sums."""
    a = c1.r_ax.astype(np.float64) + c1.r_xb.astype(np.float64)
    b = c2.r_ax.astype(np.float64) + c2.r_xb.astype(np.float64)
    return cosine(a, b)


SIM_FUNCS: dict[str, Callable[..., float]] = {"sim1": sim1, "sim2": sim2, "sim3": sim3}


def comp(query_chains: Sequence[Chain], cand_chains: Sequence[Chain],
         sim: str = "sim1", model: CondenserModel | None = None) -> float:
    """Chain-set compatibility: sum over query chains of the best match.

    Zero candidate chains score 0; zero query chains are a caller error
    (solvers fall back before reaching here).
    """
    if not query_chains:
        raise RelchainError("comp requires at least one query chain")
    if not cand_chains:
        return 0.0
    sim_fn = SIM_FUNCS[sim]
    total = 0.0
    for qc in query_chains:
        total += max(sim_fn(qc, cc, model) for cc in cand_chains)
    return total


def solve_direct(q: AnalogyQuestion, ctx: ChainContext, sim: str = "sim1",
                 model: CondenserModel | None = None) -> SolverVerdict:
    """Score candidates by chain-set compatibility with the query.

    A question whose query has no usable chains falls back to the relbert
    verdict, flagged.
    """
    if sim not in SIM_FUNCS:
        raise ValueError(f"unknown chain similarity {sim!r}")
    method = f"direct[{sim}]"
    query_chains = ctx.chains(*q.query)
    if not query_chains:
        fallback = solve_relbert(q, ctx.store)
        return replace(fallback, method=method, fallback_used=True, query_fallback=True)
    scores = tuple(comp(query_chains, ctx.chains(*cand), sim=sim, model=model)
                   for cand in q.candidates)
    return SolverVerdict(chosen=_argmax(scores), method=method, scores=scores)


def _condensed_embedding(pair: tuple[str, str], ctx: ChainContext,
                         model: CondenserModel) -> tuple[np.ndarray | None, bool]:
    """(embedding, used_raw_fallback); (None, False) when neither exists."""
    chains = ctx.chains(*pair)
    if chains:
        return condense(chains, model), False
    try:
        return ctx.store.get(*pair).astype(np.float64), True
    except MissingPairError:
        return None, False


def solve_condensed(q: AnalogyQuestion, ctx: ChainContext,
                    model: CondenserModel) -> SolverVerdict:
    """Cosine over condensed chain embeddings.

    Pairs without chains fall back to their raw stored embedding
    (flagged); candidates with neither score -inf; a query with neither
    is an error.
    """
    s_query, query_fell_back = _condensed_embedding(q.query, ctx, model)
    if s_query is None:
        raise NoRepresentationError(
            f"query {q.query} has neither chains nor a stored embedding")
    scores: list[float] = []
    cand_fallbacks: list[int] = []
    for i, cand in enumerate(q.candidates):
        s_cand, fell_back = _condensed_embedding(cand, ctx, model)
        if s_cand is None:
            scores.append(NEG_INF)
            continue
        if fell_back:
            cand_fallbacks.append(i)
        scores.append(cosine(s_query, s_cand))
    chosen = _argmax(scores)
    return SolverVerdict(
        chosen=chosen, method="condensed", scores=tuple(scores),
        fallback_used=query_fell_back or bool(cand_fallbacks),
        query_fallback=query_fell_back, candidate_fallbacks=tuple(cand_fallbacks),
        degenerate=scores[chosen] == NEG_INF)


def solve_hybrid(q: AnalogyQuestion, tau: float, ctx: ChainContext,
                 chain_method: str = "condensed",
                 model: CondenserModel | None = None, sim: str = "sim1",
                 clf: InformativenessClassifier | None = None) -> SolverVerdict:
    """Route: chain method when confidence < tau, relbert otherwise."""
    classifier = clf if clf is not None else ctx.clf
    if classifier is None:
        raise RelchainError("hybrid routing requires an informativeness classifier")
    relbert_verdict = solve_relbert(q, ctx.store)
    conf = confidence(q, ctx.store, classifier, verdict=relbert_verdict)
    label = f"hybrid[{chain_method}<{tau:g}]"
    if conf < tau:
        if chain_method == "condensed":
            if model is None:
                raise RelchainError("hybrid condensed branch requires a model")
            branch = solve_condensed(q, ctx, model)
        elif chain_method == "direct":
            branch = solve_direct(q, ctx, sim=sim, model=model)
        else:
            raise ValueError(f"unknown chain method {chain_method!r}")
        return replace(branch, method=f"{label}:{branch.method}", confidence=conf)
    return replace(relbert_verdict, method=f"{label}:relbert", confidence=conf)


def _typed_intermediates(a: str, b: str, graph: ConceptGraph) -> list[str]:
    common = (graph.neighbors(a, typed_only=True)
              & graph.neighbors(b, typed_only=True)) - {a, b}
    return sorted(common)


def solve_cn_types(q: AnalogyQuestion, graph: ConceptGraph) -> SolverVerdict:
    """Baseline on raw KG relation types, ignoring embeddings.

    A query chain (a, c, b) matches a candidate chain (x, z, y) when the
    two legs share at least one relation type each. Scores may be all
    zero, in which case index 0 is chosen and the verdict is flagged
    degenerate.
    """
    a, b = q.query
    query_mids = _typed_intermediates(a, b, graph)
    query_legs = [(graph.edge_types(a, c), graph.edge_types(c, b)) for c in query_mids]
    scores: list[float] = []
    for x, y in q.candidates:
        cand_mids = _typed_intermediates(x, y, graph)
        cand_legs = [(graph.edge_types(x, z), graph.edge_types(z, y)) for z in cand_mids]
        total = 0.0
        for first_q, second_q in query_legs:
            matched = any(first_q & first_c and second_q & second_c
                          for first_c, second_c in cand_legs)
            total += 1.0 if matched else 0.0
        scores.append(total)
    chosen = _argmax(scores)
    return SolverVerdict(chosen=chosen, method="cn_types", scores=tuple(scores),
                         degenerate=scores[chosen] == 0.0)


def explain(q: AnalogyQuestion, verdict: SolverVerdict, ctx: ChainContext,
            model: CondenserModel | None = None, sim: str = "sim1"
            ) -> tuple[str, str]:
    """Most influential (query intermediate, candidate intermediate).

    Maximizes the chain similarity between the query's and the chosen
    candidate's chains; ties resolve to the lexicographically first
    (c, z). Errors if either side has no chains.
    """
    sim_fn = SIM_FUNCS[sim]
    query_chains = ctx.chains(*q.query)
    cand_chains = ctx.chains(*q.candidates[verdict.chosen])
    if not query_chains or not cand_chains:
        raise NoRepresentationError("explain requires chains on both sides")
    best: tuple[str, str] | None = None
    best_score = NEG_INF
    for qc in sorted(query_chains, key=lambda c: c.intermediate):
        for cc in sorted(cand_chains, key=lambda c: c.intermediate):
            score = sim_fn(qc, cc, model)
            if score > best_score:
                best_score = score
                best = (qc.intermediate, cc.intermediate)
    assert best is not None
    return best
