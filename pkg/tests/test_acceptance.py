"""Acceptance suite: one test per criterion, each printing a PASS line.

Brute-force reference implementations live in oracles.py and are plain
Python; the package must agree with them on every chosen index and on all
scores to 1e-9. Real-data criteria need exported artifacts (see README)
and skip when the RELCHAIN_REAL_DATA directory is absent.
"""
import os
import struct
import time
from pathlib import Path

import numpy as np
import pytest

from relchain.condenser import (Chain, TrainConfig, batch_loss_and_grads,
                                condense, init_model, load_condenser,
                                pair_loss, train_condenser, write_condenser)
from relchain.datasets import AnalogyQuestion, load_dataset
from relchain.errors import RelchainError
from relchain.evaluate import evaluate
from relchain.graph import (ConceptGraph, GraphEdge, intermediates,
                            predict_missing_links)
from relchain.informativeness import (InformativenessClassifier, inf,
                                      load_classifier, write_classifier)
from relchain.relations import RelationStore, load_relation_store, write_relation_store
from relchain.solver import (ChainContext, comp, confidence, solve_cn_types,
                             solve_condensed, solve_direct, solve_hybrid,
                             solve_relbert)
from relchain.vectors import WordVectorTable, load_word_vectors, write_word_vectors

from conftest import make_store, make_table
from oracles import (o_argmax, o_cn_types, o_comp, o_condense, o_cosine,
                     o_relbert, o_sim1, o_sim3)
from planted import build_world

RELATION_LABELS = ["/r/IsA", "/r/PartOf", "/r/UsedFor", "/r/AtLocation"]


def _report(name: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def _scores_match(got, want, tol=1e-9):
    if len(got) != len(want):
        return False
    for g, w in zip(got, want):
        if w == float("-inf") or g == float("-inf"):
            if g != w:
                return False
        elif abs(g - w) > tol:
            return False
    return True


# ---------------------------------------------------------------------------
# Criterion 1: oracle equivalence of every solver on 200 random questions
# ---------------------------------------------------------------------------

class _RandomQuestionWorld:
    """Ground truth held as plain dicts so the oracle never touches the package."""

    def __init__(self, seed: int, d: int = 16, m: int = 16):
        rng = np.random.default_rng(seed)
        self.rng = rng
        self.d = d
        self.model = init_model(d, m, seed=seed)
        self.n_cands = int(rng.integers(2, 7))
        self.pairs = [("qa", "qb")] + [(f"x{i}", f"y{i}") for i in range(self.n_cands)]
        self.question = AnalogyQuestion(query=self.pairs[0],
                                        candidates=tuple(self.pairs[1:]),
                                        gold=int(rng.integers(self.n_cands)))
        self.entries: dict[tuple[str, str], np.ndarray] = {}
        self.mids: dict[tuple[str, str], list[str]] = {}
        self.leg_types: dict[tuple[str, str], list[str]] = {}
        graph = ConceptGraph()
        for pi, (a, b) in enumerate(self.pairs):
            lo = 1 if pi == 0 else 0  # the query always has at least one chain
            n_chains = int(rng.integers(lo, 9))
            self.mids[(a, b)] = []
            for j in range(n_chains):
                x = f"m_{pi}_{j}"
                self.mids[(a, b)].append(x)
                first = RELATION_LABELS[int(rng.integers(len(RELATION_LABELS)))]
                second = RELATION_LABELS[int(rng.integers(len(RELATION_LABELS)))]
                graph.add_edge(GraphEdge(a, x, first))
                graph.add_edge(GraphEdge(x, b, second))
                self.leg_types[(a, x)] = [first]
                self.leg_types[(x, b)] = [second]
                # roughly one leg in ten is missing from the store
                if rng.random() > 0.1:
                    self.entries[(a, x)] = rng.normal(size=d).astype(np.float32)
                if rng.random() > 0.1:
                    self.entries[(x, b)] = rng.normal(size=d).astype(np.float32)
            direct = pi == 0 or rng.random() > 0.25
            if direct:
                self.entries[(a, b)] = rng.normal(size=d).astype(np.float32)
        self.graph = graph
        self.store = RelationStore.from_entries(
            [(a, b, v) for (a, b), v in sorted(self.entries.items())])
        self.ctx = ChainContext(graph=graph, store=self.store, smoothing=False)

    # ground-truth chain triples, independent of graph traversal
    def chains(self, pair):
        out = []
        for x in self.mids[pair]:
            r1 = self.entries.get((pair[0], x))
            r2 = self.entries.get((x, pair[1]))
            if r1 is not None and r2 is not None:
                out.append((x, r1, r2))
        return out

    def cn_legs(self, pair):
        legs = []
        for x in sorted(self.mids[pair]):
            legs.append((set(self.leg_types[(pair[0], x)]),
                         set(self.leg_types[(x, pair[1])])))
        return legs


def test_acceptance_oracle_equivalence_solvers():
    start = time.time()
    mismatches = []
    for i in range(200):
        world = _RandomQuestionWorld(seed=3000 + i)
        q = world.question
        model = world.model
        margs = (model.A.tolist(), model.b_comp.tolist(),
                 model.W_dec.tolist(), model.b_dec.tolist())

        # relbert
        got = solve_relbert(q, world.store)
        want_idx, want_scores = o_relbert(
            world.entries[q.query],
            [world.entries.get(c) for c in q.candidates])
        if got.chosen != want_idx or not _scores_match(got.scores, want_scores):
            mismatches.append((i, "relbert"))

        # direct under each similarity, plus comp itself
        qchains = world.chains(q.query)
        for sim_name in ("sim1", "sim2", "sim3"):
            got = solve_direct(q, world.ctx, sim=sim_name, model=model)
            if sim_name == "sim1":
                sim_fn = o_sim1
            elif sim_name == "sim3":
                sim_fn = o_sim3
            else:
                cache = {}

                def embed(tr):
                    if tr[0] not in cache:
                        cache[tr[0]] = o_condense([tr], *margs)
                    return cache[tr[0]]

                def sim_fn(c1, c2):
                    return o_cosine(embed(c1), embed(c2))
            if qchains:
                want_scores = [o_comp(qchains, world.chains(c), sim_fn)
                               for c in q.candidates]
                want_idx = o_argmax(want_scores)
            else:  # chainless query falls back to relbert
                want_idx, want_scores = o_relbert(
                    world.entries[q.query],
                    [world.entries.get(c) for c in q.candidates])
            if got.chosen != want_idx or not _scores_match(got.scores, want_scores):
                mismatches.append((i, f"direct[{sim_name}]"))

        # condensed (raw-embedding fallback for chainless pairs)
        got = solve_condensed(q, world.ctx, model)

        def s_of(pair):
            chains = world.chains(pair)
            if chains:
                return o_condense(chains, *margs)
            vec = world.entries.get(pair)
            return None if vec is None else [float(v) for v in vec]

        sq = s_of(q.query)
        want_scores = [float("-inf") if s_of(c) is None else o_cosine(sq, s_of(c))
                       for c in q.candidates]
        want_idx = o_argmax(want_scores)
        if got.chosen != want_idx or not _scores_match(got.scores, want_scores):
            mismatches.append((i, "condensed"))

        # cn-types
        got = solve_cn_types(q, world.graph)
        want_idx, want_scores = o_cn_types(
            world.cn_legs(q.query), [world.cn_legs(c) for c in q.candidates])
        if got.chosen != want_idx or list(got.scores) != want_scores:
            mismatches.append((i, "cn_types"))

    elapsed = time.time() - start
    _report("oracle equivalence, 200 random questions x 6 solvers",
            not mismatches and elapsed < 10.0,
            f"mismatches={mismatches[:5]}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# Criterion 2: condenser gradient check at d=4, m=8
# ---------------------------------------------------------------------------

def test_acceptance_gradient_check():
    start = time.time()
    rng = np.random.default_rng(29)
    d, m = 4, 8
    model = init_model(d, m, seed=13)
    items = []
    for p in range(2):
        chains = [Chain(("a", "b"), f"x{p}_{i}",
                        rng.normal(size=d).astype(np.float32),
                        rng.normal(size=d).astype(np.float32))
                  for i in range(int(rng.integers(1, 4)))]
        items.append((chains, rng.normal(size=d)))
    _, grads = batch_loss_and_grads(items, model)

    def total_loss():
        return sum(pair_loss(chains, target, model) for chains, target in items)

    h = 1e-5
    worst = 0.0
    for name in ("A", "b_comp", "W_dec", "b_dec"):
        flat = getattr(model, name).reshape(-1)
        grad_flat = grads[name].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            plus = total_loss()
            flat[idx] = orig - h
            minus = total_loss()
            flat[idx] = orig
            fd = (plus - minus) / (2 * h)
            rel = abs(grad_flat[idx] - fd) / max(abs(fd), 1e-8)
            worst = max(worst, rel)
    elapsed = time.time() - start
    _report("gradient check vs central differences (all tensors)",
            worst <= 1e-4 and elapsed < 5.0,
            f"worst rel err {worst:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# Criterion 3: planted-structure recovery
# ---------------------------------------------------------------------------

def test_acceptance_planted_structure_recovery():
    start = time.time()
    world = build_world(dim=16, n_train=500, n_questions=200, seed=7)
    store_full = world.store(include_indirect=True)
    store_relbert = world.store(include_indirect=False)
    clf = world.always_informative_clf()

    # batch 16 rather than the 256 default: 450 training pairs only yield
    # enough optimizer steps at the default learning rate with small batches
    cfg = TrainConfig(lr=0.0025, epochs=10, batch_size=16, seed=0)
    result = train_condenser(world.train_pairs, world.graph, store_full, clf,
                             cfg, latent_dim=64, smoothing=False)
    assert result.val_losses[-1] <= -0.9  # fixture sanity: mean val cos >= 0.9

    ctx = ChainContext(graph=world.graph, store=store_full, clf=clf, smoothing=False)
    cond_correct = sum(
        int(solve_condensed(q, ctx, result.model).chosen == q.gold)
        for q in world.questions)

    relbert_correct = 0
    for q in world.questions:
        try:
            relbert_correct += int(solve_relbert(q, store_relbert).chosen == q.gold)
        except RelchainError:
            pass  # embeddings removed: the question goes unanswered

    cond_acc = cond_correct / len(world.questions)
    relbert_acc = relbert_correct / len(world.questions)
    elapsed = time.time() - start
    _report("planted-structure recovery (condensed >= 0.95, relbert <= 0.60)",
            cond_acc >= 0.95 and relbert_acc <= 0.60 and elapsed < 120.0,
            f"condensed {cond_acc:.3f}, relbert {relbert_acc:.3f}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# Criterion 4: invariant suites, >= 100 random cases each
# ---------------------------------------------------------------------------

def test_acceptance_invariant_condense_permutation():
    cases = 0
    for seed in range(100):
        rng = np.random.default_rng(4000 + seed)
        d, m = int(rng.integers(2, 10)), int(rng.integers(2, 12))
        model = init_model(d, m, seed=seed)
        chains = [Chain(("a", "b"), f"x{i}", rng.normal(size=d).astype(np.float32),
                        rng.normal(size=d).astype(np.float32))
                  for i in range(int(rng.integers(1, 9)))]
        base = condense(chains, model)
        perm = [chains[i] for i in rng.permutation(len(chains))]
        assert np.array_equal(condense(perm, model), base)
        cases += 1
    _report("condense chain-permutation invariance", cases >= 100, f"{cases} cases")


def test_acceptance_invariant_comp_monotone():
    # quantified over non-empty candidate chain sets: the max-over-superset
    # argument starts there (the defined score for zero chains is 0, which a
    # single all-negative chain may legitimately undercut)
    cases = 0
    for seed in range(100):
        rng = np.random.default_rng(4100 + seed)
        d = int(rng.integers(2, 8))
        qcs = [Chain(("a", "b"), f"q{i}", rng.normal(size=d).astype(np.float32),
                     rng.normal(size=d).astype(np.float32))
               for i in range(int(rng.integers(1, 6)))]
        ccs = [Chain(("x", "y"), f"c{i}", rng.normal(size=d).astype(np.float32),
                     rng.normal(size=d).astype(np.float32))
               for i in range(int(rng.integers(1, 6)))]
        extra = Chain(("x", "y"), "c_extra", rng.normal(size=d).astype(np.float32),
                      rng.normal(size=d).astype(np.float32))
        before = comp(qcs, ccs, sim="sim1")
        after = comp(qcs, ccs + [extra], sim="sim1")
        assert after >= before - 1e-12
        cases += 1
    _report("comp monotone under candidate-chain addition", cases >= 100,
            f"{cases} cases")


def test_acceptance_invariant_smoothing_superset():
    cases = 0
    for seed in range(100):
        rng = np.random.default_rng(4200 + seed)
        n = int(rng.integers(6, 14))
        tokens = [f"w{i}" for i in range(n)]
        table = make_table(tokens, 4, rng)
        graph = ConceptGraph()
        for _ in range(int(rng.integers(5, 40))):
            h, t = rng.choice(n, size=2, replace=False)
            graph.add_edge(GraphEdge(tokens[h], tokens[t], "/r/RelatedTo"))
        a, b = tokens[0], tokens[1]
        plain = set(intermediates(a, b, graph, smoothing=False, cap=10_000).intermediates)
        smooth = set(intermediates(a, b, graph, table=table, smoothing=True,
                                   cap=10_000).intermediates)
        assert plain <= smooth
        cases += 1
    _report("semantic smoothing yields a superset", cases >= 100, f"{cases} cases")


def test_acceptance_invariant_mlp_strict_threshold():
    cases = 0
    for seed in range(100):
        rng = np.random.default_rng(4300 + seed)
        dim = 4
        tokens = ["w"] + [f"n{i}" for i in range(int(rng.integers(3, 10)))]
        table = make_table(tokens, dim, rng)
        pairs = [("w", t) for t in tokens[1:] if rng.random() > 0.2]
        if not pairs:
            pairs = [("w", tokens[1])]
        store = make_store(pairs, dim, rng)
        clf = InformativenessClassifier(weights=rng.normal(size=dim),
                                        bias=float(rng.normal()))
        threshold = float(rng.uniform(0.2, 0.9))
        edges = predict_missing_links("w", [table], store, clf, k=5,
                                      threshold=threshold)
        for e in edges:  # re-checkable post hoc, strictly above
            assert inf(store.get(e.head, e.tail), clf) > threshold
        cases += 1
    _report("every mlp edge strictly above threshold", cases >= 100, f"{cases} cases")


def test_acceptance_invariant_hybrid_equals_relbert_above_tau():
    cases = 0
    for seed in range(120):
        rng = np.random.default_rng(4400 + seed)
        d = 6
        n = int(rng.integers(2, 6))
        entries = [("a", "b", rng.normal(size=d))]
        entries += [(f"x{i}", f"y{i}", rng.normal(size=d)) for i in range(n)]
        store = RelationStore.from_entries(entries)
        clf = InformativenessClassifier(weights=rng.normal(size=d),
                                        bias=float(rng.uniform(2.0, 8.0)))
        q = AnalogyQuestion(query=("a", "b"),
                            candidates=tuple((f"x{i}", f"y{i}") for i in range(n)),
                            gold=0)
        tau = float(rng.choice([0.25, 0.5]))
        conf = confidence(q, store, clf)
        if conf < tau:
            continue
        graph = ConceptGraph()
        ctx = ChainContext(graph=graph, store=store, clf=clf, smoothing=False)
        verdict = solve_hybrid(q, tau, ctx, chain_method="direct")
        relbert = solve_relbert(q, store)
        assert verdict.chosen == relbert.chosen
        assert verdict.scores == relbert.scores
        cases += 1
    _report("hybrid equals relbert at confidence >= tau", cases >= 100,
            f"{cases} cases")


def test_acceptance_invariant_argmax_scale_invariance():
    cases = 0
    for seed in range(100):
        rng = np.random.default_rng(4500 + seed)
        world = _RandomQuestionWorld(seed=5000 + seed, d=8, m=8)
        scale = float(rng.uniform(0.1, 20.0))
        scaled_store = RelationStore.from_entries(
            [(a, b, world.entries[(a, b)] * scale)
             for (a, b) in sorted(world.entries)])
        scaled_ctx = ChainContext(graph=world.graph, store=scaled_store,
                                  smoothing=False)
        q = world.question
        assert solve_relbert(q, world.store).chosen == \
            solve_relbert(q, scaled_store).chosen
        for sim_name in ("sim1", "sim3"):
            assert solve_direct(q, world.ctx, sim=sim_name).chosen == \
                solve_direct(q, scaled_ctx, sim=sim_name).chosen
        cases += 1
    _report("argmax invariance under global positive scaling", cases >= 100,
            f"{cases} cases")


# ---------------------------------------------------------------------------
# Criterion 5: format round-trips and export-check accept/reject
# ---------------------------------------------------------------------------

def _fixture_files(tmp_path, rng):
    table = make_table(["alpha", "beta", "gamma"], 6, rng)
    wvec = tmp_path / "t.wvec"
    write_word_vectors(table, wvec)
    store = make_store([("a", "b"), ("b", "a"), ("c", "d")], 6, rng)
    relc = tmp_path / "s.relc"
    write_relation_store(store, relc)
    clf = InformativenessClassifier(weights=rng.normal(size=6), bias=0.5)
    infc = tmp_path / "c.infc"
    write_classifier(clf, infc)
    model = init_model(4, 6, seed=1)
    cond = tmp_path / "m.cond"
    write_condenser(model, cond)
    return wvec, relc, infc, cond


def test_acceptance_format_round_trips(tmp_path, rng):
    wvec, relc, infc, cond = _fixture_files(tmp_path, rng)
    ok = True
    # write -> read -> write must reproduce the bytes exactly
    t2 = tmp_path / "t2.wvec"
    write_word_vectors(load_word_vectors(wvec, format="binary"), t2)
    ok &= t2.read_bytes() == wvec.read_bytes()
    s2 = tmp_path / "s2.relc"
    write_relation_store(load_relation_store(relc), s2)
    ok &= s2.read_bytes() == relc.read_bytes()
    c2 = tmp_path / "c2.infc"
    write_classifier(load_classifier(infc), c2)
    ok &= c2.read_bytes() == infc.read_bytes()
    m2 = tmp_path / "m2.cond"
    write_condenser(load_condenser(cond), m2)
    ok &= m2.read_bytes() == cond.read_bytes()
    _report("binary formats bit-exact across write/read/write", ok)


def test_acceptance_export_check_accepts_and_rejects(tmp_path, rng):
    from relchain.cli import main
    wvec, relc, infc, cond = _fixture_files(tmp_path, rng)
    accepted = main(["export-check", str(wvec), str(relc), str(infc), str(cond)]) == 0

    corrupted = []
    # 1: wrong magic
    raw = bytearray(wvec.read_bytes())
    raw[:4] = b"JUNK"
    p = tmp_path / "bad_magic.wvec"
    p.write_bytes(bytes(raw))
    corrupted.append(p)
    # 2: unsupported version
    raw = bytearray(relc.read_bytes())
    raw[4:8] = struct.pack("<I", 99)
    p = tmp_path / "bad_version.relc"
    p.write_bytes(bytes(raw))
    corrupted.append(p)
    # 3: truncated payload
    p = tmp_path / "truncated.cond"
    p.write_bytes(cond.read_bytes()[:-5])
    corrupted.append(p)
    # 4: trailing garbage
    p = tmp_path / "trailing.infc"
    p.write_bytes(infc.read_bytes() + b"\x00\x01")
    corrupted.append(p)
    # 5: zero-vector record
    table = WordVectorTable(["alpha", "beta"],
                            np.array([[1, 2], [3, 4]], dtype=np.float32))
    p = tmp_path / "zero_row.wvec"
    write_word_vectors(table, p)
    raw = bytearray(p.read_bytes())
    raw[-8:] = struct.pack("<ff", 0.0, 0.0)
    p.write_bytes(bytes(raw))
    corrupted.append(p)

    rejected = all(main(["export-check", str(p)]) == 2 for p in corrupted)
    _report("export-check accepts fixtures and rejects 5 corruptions",
            accepted and rejected)


# ---------------------------------------------------------------------------
# Secondary criteria: real exported artifacts required
# ---------------------------------------------------------------------------

REAL_DATA = os.environ.get("RELCHAIN_REAL_DATA")
real_data_missing = pytest.mark.skipif(
    not REAL_DATA or not Path(REAL_DATA or ".").is_dir(),
    reason="RELCHAIN_REAL_DATA not set; real exports unavailable in this environment")


def _real(name: str) -> Path:
    path = Path(REAL_DATA) / name
    if not path.exists():
        pytest.skip(f"{path} missing")
    return path


@real_data_missing
def test_secondary_relbert_sat_baseline():
    store = load_relation_store(_real("sat.relc"))
    ds = load_dataset(_real("sat.jsonl"), name="SAT")
    assert len(ds) == 337
    assert abs(ds.mean_candidates - 5.0) < 0.05
    correct = 0
    answered = 0
    for q in ds.questions:
        try:
            correct += int(solve_relbert(q, store).chosen == q.gold)
            answered += 1
        except RelchainError:
            pass
    acc = correct / len(ds)
    _report("SAT relbert baseline 73.6 +- 1.5",
            abs(acc * 100 - 73.6) <= 1.5, f"acc {acc * 100:.1f}% on {answered} answered")


@real_data_missing
def test_secondary_difficulty_gradient():
    store = load_relation_store(_real("sat.relc"))
    clf = load_classifier(_real("informativeness.infc"))
    ds = load_dataset(_real("sat.jsonl"), name="SAT")
    result = evaluate(ds, lambda q: solve_relbert(q, store), store, clf=clf,
                      method="relbert")
    rep = result.report
    easy, hard = rep.buckets[3].accuracy, rep.buckets[0].accuracy
    _report("SAT accuracy gradient: top bucket exceeds bottom by >= 20 points",
            easy is not None and hard is not None and (easy - hard) >= 0.20,
            f"hard {hard}, easy {easy}, counts "
            f"{[b.count for b in rep.buckets]}")


@real_data_missing
def test_secondary_hybrid_improvement_direction():
    store = load_relation_store(_real("sat.relc"))
    clf = load_classifier(_real("informativeness.infc"))
    model = load_condenser(_real("condenser.cond"))
    from relchain.graph import load_graph
    graph = load_graph(_real("graph.tsv"))
    ds = load_dataset(_real("sat.jsonl"), name="SAT")
    ctx = ChainContext(graph=graph, store=store, clf=clf)
    relbert_correct = hybrid_correct = 0
    for q in ds.questions:
        try:
            relbert_correct += int(solve_relbert(q, store).chosen == q.gold)
        except RelchainError:
            pass
        try:
            verdict = solve_hybrid(q, 0.25, ctx, chain_method="condensed", model=model)
            hybrid_correct += int(verdict.chosen == q.gold)
        except RelchainError:
            pass
    _report("Cond_{<0.25} at least matches relbert on SAT",
            hybrid_correct >= relbert_correct,
            f"hybrid {hybrid_correct}, relbert {relbert_correct} of {len(ds)}")
