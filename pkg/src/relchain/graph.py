"""Concept graph construction, augmentation, and intermediate lookup.

The graph starts from a knowledge-graph edge dump, then grows by two
augmentation strategies: predicted links between a word and its
embedding-space neighbors whose relation embedding scores as informative,
and (at query time) semantic smoothing, which lets an intermediate concept
qualify through a close neighbor of either endpoint.

Edges keep their typed relation label and direction as ingested, but path
finding treats the graph as undirected: two-hop reasoning like
umbrella -> rain -> cloudy does not care which way the dump oriented each
edge.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .concepts import normalize
from .errors import MissingPairError, NotFoundError, ParseError
from .informativeness import InformativenessClassifier, inf
from .relations import RelationStore
from .vectors import WordVectorTable, merged_neighbors, top_k_neighbors

logger = logging.getLogger(__name__)

DEFAULT_EXCLUSIONS = frozenset({"/r/NotCapableOf", "/r/NotDesires", "/r/NotHasProperty"})
PROVENANCE_KG = "kg"
PROVENANCE_MLP = "mlp"


@dataclass(frozen=True)
class GraphEdge:
    """An undirected-for-pathfinding edge; typed when it came from the KG."""

    head: str
    tail: str
    relation: str | None
    provenance: str = PROVENANCE_KG

    def __post_init__(self):
        if self.head == self.tail:
            raise ValueError(f"self-loop edge on {self.head!r}")
        if self.provenance not in (PROVENANCE_KG, PROVENANCE_MLP):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def other(self, concept: str) -> str:
        return self.tail if concept == self.head else self.head


@dataclass(frozen=True)
class IntermediateSet:
    """Ranked intermediate concepts connecting an ordered pair."""

    pair: tuple[str, str]
    intermediates: tuple[str, ...]


class ConceptGraph:
    """Mutable during construction; treat as immutable once queries start."""

    def __init__(self):
        self._adj: dict[str, set[GraphEdge]] = {}
        self._edges: set[GraphEdge] = set()

    def add_edge(self, edge: GraphEdge) -> bool:
        """Insert ``edge``; returns False if an identical edge already exists."""
        if edge in self._edges:
            return False
        self._edges.add(edge)
        self._adj.setdefault(edge.head, set()).add(edge)
        self._adj.setdefault(edge.tail, set()).add(edge)
        return True

    def add_edges(self, edges: Iterable[GraphEdge]) -> int:
        return sum(1 for e in edges if self.add_edge(e))

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def edges(self) -> set[GraphEdge]:
        return set(self._edges)

    def concepts(self) -> set[str]:
        return set(self._adj)

    def __contains__(self, concept: str) -> bool:
        return concept in self._adj

    def neighbors(self, concept: str, typed_only: bool = False) -> set[str]:
        """Concepts adjacent to ``concept``; optionally only via typed KG edges."""
        out: set[str] = set()
        for edge in self._adj.get(concept, ()):
            if typed_only and (edge.relation is None or edge.provenance != PROVENANCE_KG):
                continue
            out.add(edge.other(concept))
        return out

    def edge_types(self, x: str, y: str) -> set[str]:
        """Relation labels of typed KG edges between x and y, either direction."""
        out: set[str] = set()
        for edge in self._adj.get(x, ()):
            if edge.relation is None or edge.provenance != PROVENANCE_KG:
                continue
            if {edge.head, edge.tail} == {x, y}:
                out.add(edge.relation)
        return out


def ingest_kg(path: str | Path, exclusions: frozenset[str] | set[str] = DEFAULT_EXCLUSIONS,
              language: str = "en") -> ConceptGraph:
    """Build a graph from a ``relation<TAB>head<TAB>tail[<TAB>weight]`` dump.

    Concepts in ConceptNet term form (``/c/<lang>/<token>...``) are kept
    only when their language tag matches ``language``; bare tokens pass
    through. Rows whose relation is excluded, and self-loops after
    normalization, are dropped.
    """
    graph = ConceptGraph()
    dropped_excluded = dropped_lang = dropped_loops = 0
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            stripped = line.rstrip("\n")
            if not stripped.strip() or stripped.startswith("#"):
                continue
            parts = stripped.split("\t")
            if len(parts) not in (3, 4):
                raise ParseError(str(path), lineno,
                                 f"expected 3 or 4 tab-separated columns, found {len(parts)}")
            relation = parts[0].strip()
            if not relation:
                raise ParseError(str(path), lineno, "empty relation label")
            head = _concept_from_term(parts[1], language)
            tail = _concept_from_term(parts[2], language)
            if head is None or tail is None:
                dropped_lang += 1
                continue
            if not head or not tail:
                raise ParseError(str(path), lineno, "empty concept")
            if relation in exclusions:
                dropped_excluded += 1
                continue
            if head == tail:
                dropped_loops += 1
                continue
            graph.add_edge(GraphEdge(head, tail, relation, PROVENANCE_KG))
    logger.info("ingested %d edges (%d excluded-relation, %d other-language, "
                "%d self-loop rows dropped)", graph.edge_count, dropped_excluded,
                dropped_lang, dropped_loops)
    return graph


def _concept_from_term(term: str, language: str) -> str | None:
    """Normalize a concept cell; None means wrong-language ConceptNet term."""
    term = term.strip()
    if term.startswith("/c/"):
        parts = term.split("/")
        # ['', 'c', lang, token, optional sense...]
        if len(parts) < 4 or not parts[3]:
            return ""
        if parts[2] != language:
            return None
        return normalize(parts[3])
    if not term:
        return ""
    return normalize(term)


def predict_missing_links(word: str, tables: Sequence[WordVectorTable],
                          store: RelationStore, clf: InformativenessClassifier,
                          k: int = 250, threshold: float = 0.75,
                          missing_out: list[tuple[str, str]] | None = None) -> set[GraphEdge]:
    """Predict untyped links from ``word`` to its informative neighbors.

    Considers the union of per-table top-k neighbors and keeps y whenever
    inf(r_wy) exceeds ``threshold`` strictly. Neighbors without a stored
    (word, y) embedding are skipped, counted, and appended to
    ``missing_out`` when given.
    """
    w = normalize(word)
    edges: set[GraphEdge] = set()
    skipped = 0
    for y in sorted(merged_neighbors(w, k, tables)):
        if y == w:
            continue
        try:
            r = store.get(w, y)
        except MissingPairError:
            skipped += 1
            if missing_out is not None:
                missing_out.append((w, y))
            continue
        if inf(r, clf) > threshold:
            edges.add(GraphEdge(w, y, None, PROVENANCE_MLP))
    if skipped:
        logger.debug("predict_missing_links(%s): %d neighbors lacked embeddings", w, skipped)
    return edges


@dataclass
class AugmentResult:
    """Outcome of an augmentation sweep over a word list."""

    edges_added: int = 0
    words_missing: list[str] = field(default_factory=list)
    missing_pairs: list[tuple[str, str]] = field(default_factory=list)


def augment_graph(graph: ConceptGraph, words: Iterable[str],
                  tables: Sequence[WordVectorTable], store: RelationStore,
                  clf: InformativenessClassifier, k: int = 250,
                  threshold: float = 0.75) -> AugmentResult:
    """Run missing-link prediction for every word and insert the edges."""
    result = AugmentResult()
    for word in words:
        w = normalize(word)
        try:
            edges = predict_missing_links(w, tables, store, clf, k=k,
                                          threshold=threshold,
                                          missing_out=result.missing_pairs)
        except NotFoundError:
            result.words_missing.append(w)
            continue
        result.edges_added += graph.add_edges(edges)
    return result


def intermediates(a: str, b: str, graph: ConceptGraph,
                  table: WordVectorTable | None = None,
                  smoothing: bool = True, cap: int = 50,
                  store: RelationStore | None = None,
                  clf: InformativenessClassifier | None = None,
                  n_smooth: int = 5) -> IntermediateSet:
    """Intermediate concepts x forming 2-paths a - x - b.

    Without smoothing, x must be adjacent to both endpoints. With
    smoothing, adjacency to any of the ``n_smooth`` nearest neighbors of
    an endpoint (from ``table``) counts for that side; the neighbor words
    themselves become intermediates only if they qualify by adjacency like
    anything else. Results are ranked by min(inf(r_ax), inf(r_xb)),
    descending, with pairs missing from ``store`` ranked last, then
    truncated to ``cap``. Absent endpoints simply yield an empty set.
    """
    a = normalize(a)
    b = normalize(b)

    def side_sources(w: str) -> set[str]:
        sources = {w}
        if smoothing and table is not None and w in table:
            sources.update(tok for tok, _ in top_k_neighbors(w, n_smooth, table))
        return sources

    reach_a: set[str] = set()
    for s in side_sources(a):
        reach_a |= graph.neighbors(s)
    reach_b: set[str] = set()
    for s in side_sources(b):
        reach_b |= graph.neighbors(s)
    candidates = (reach_a & reach_b) - {a, b}

    def rank_key(x: str) -> tuple[float, str]:
        score = -1.0  # below any probability: missing embeddings rank last
        if store is not None and clf is not None:
            try:
                score = min(inf(store.get(a, x), clf), inf(store.get(x, b), clf))
            except MissingPairError:
                score = -1.0
        return (-score, x)

    ranked = sorted(candidates, key=rank_key)
    return IntermediateSet(pair=(a, b), intermediates=tuple(ranked[:cap]))


def write_graph(graph: ConceptGraph, path: str | Path) -> None:
    """Persist as TSV ``head<TAB>tail<TAB>relation-or-_<TAB>provenance``."""
    rows = sorted((e.head, e.tail, e.relation or "_", e.provenance)
                  for e in graph.edges())
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write("\t".join(row) + "\n")


def load_graph(path: str | Path) -> ConceptGraph:
    """Load a graph persisted by :func:`write_graph`."""
    graph = ConceptGraph()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            stripped = line.rstrip("\n")
            if not stripped.strip() or stripped.startswith("#"):
                continue
            parts = stripped.split("\t")
            if len(parts) != 4:
                raise ParseError(str(path), lineno,
                                 f"expected 4 tab-separated columns, found {len(parts)}")
            head, tail, relation, provenance = parts
            try:
                edge = GraphEdge(normalize(head), normalize(tail),
                                 None if relation == "_" else relation,
                                 provenance)
            except ValueError as exc:
                raise ParseError(str(path), lineno, str(exc)) from None
            graph.add_edge(edge)
    return graph
