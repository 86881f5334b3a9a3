"""Command-line interface.

Subcommands cover the whole pipeline: KG ingestion, artifact validation,
classifier training, graph augmentation, condenser training, solving, and
evaluation/reporting. Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import binio
from .concepts import normalize
from .condenser import (CondenserModel, TrainConfig, load_condenser, train_condenser,
                        write_condenser)
from .config import Config, load_config
from .datasets import load_dataset
from .errors import RelchainError
from .evaluate import (evaluate, read_records, render_csv, render_text,
                       report_from_records, write_records)
from .graph import (ConceptGraph, augment_graph, ingest_kg, load_graph, write_graph)
from .informativeness import (ClassifierConfig, corrupt_negatives, load_classifier,
                              load_labeled_pairs, train_classifier, write_classifier)
from .relations import load_relation_store
from .solver import (ChainContext, solve_cn_types, solve_condensed, solve_direct,
                     solve_hybrid, solve_relbert, explain)
from .vectors import load_word_vectors

logger = logging.getLogger(__name__)

METHODS = ("relbert", "condensed", "direct", "direct-sim2", "direct-sim3",
           "cn-types", "hybrid-condensed", "hybrid-direct")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="relchain",
                     description="Relation embedding chains for analogy questions")
    parser.add_argument("--config", help="JSON config path (or $RELCHAIN_CONFIG)")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--threads", type=int, help="override config thread count")
    parser.add_argument("-v", "--verbose", action="store_true")
    # the same globals are accepted after the subcommand; SUPPRESS keeps a
    # subparser from clobbering a value parsed before it
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", default=argparse.SUPPRESS)
    shared.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    shared.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    shared.add_argument("-v", "--verbose", action="store_true",
                        default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("ingest-kg", parents=[shared],
                       help="build a concept graph from an edge dump")
    p.add_argument("--edges", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--language")
    p.add_argument("--exclude", action="append", default=None,
                   help="relation label to drop (repeatable; overrides config)")

    p = sub.add_parser("export-check", parents=[shared], help="validate binary artifact files")
    p.add_argument("files", nargs="+")

    p = sub.add_parser("train-inf", parents=[shared], help="train the informativeness classifier")
    p.add_argument("--pairs", required=True, help="labeled pairs TSV")
    p.add_argument("--store", required=True, help="RELC relation store")
    p.add_argument("--out", required=True, help="INFC output path")
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--l2", type=float)

    p = sub.add_parser("augment", parents=[shared], help="add predicted links around a word list")
    p.add_argument("--graph", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--clf", required=True)
    p.add_argument("--vectors", action="append", required=True,
                   help="WVEC word-vector table (repeatable)")
    p.add_argument("--words", required=True, help="file with one word per line")
    p.add_argument("--out", required=True)
    p.add_argument("--needed-pairs", help="write pairs lacking embeddings here")
    p.add_argument("--k", type=int)
    p.add_argument("--threshold", type=float)

    p = sub.add_parser("train-cond", parents=[shared], help="train the chain condenser")
    p.add_argument("--graph", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--clf", required=True)
    p.add_argument("--out", required=True, help="COND output path")
    p.add_argument("--pairs", help="2-column TSV of training pairs")
    p.add_argument("--from-graph", type=int, metavar="N",
                   help="draw up to N training pairs from the graph's KG edges")
    p.add_argument("--smooth-vectors", help="WVEC table for semantic smoothing")
    p.add_argument("--latent-dim", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--threshold", type=float)

    for name in ("solve", "eval"):
        p = sub.add_parser(name, parents=[shared], help=f"{name} analogy questions")
        p.add_argument("--method", required=True, choices=METHODS)
        p.add_argument("--dataset", action="append", required=True,
                       help="JSONL dataset path (repeatable for eval)")
        p.add_argument("--store", required=True)
        p.add_argument("--graph")
        p.add_argument("--clf")
        p.add_argument("--model", help="COND condenser checkpoint")
        p.add_argument("--smooth-vectors", help="WVEC table for semantic smoothing")
        p.add_argument("--tau", type=float, help="hybrid routing threshold")
        p.add_argument("--explain", action="store_true",
                       help="attach best (c, z) chain pair to each verdict")
        if name == "solve":
            p.add_argument("--out", required=True, help="verdict JSONL output")
        else:
            p.add_argument("--out-verdicts", help="also write verdict JSONL here")
            p.add_argument("--csv", help="write the report as CSV here")

    p = sub.add_parser("report", parents=[shared], help="re-render reports from stored verdicts")
    p.add_argument("--verdicts", action="append", required=True)
    p.add_argument("--csv")
    return parser


def _check_one(path: str) -> tuple[bool, str]:
    try:
        with open(path, "rb") as f:
            magic = f.read(4)
    except OSError as exc:
        return False, str(exc)
    try:
        if magic == binio.MAGIC_WVEC:
            t = load_word_vectors(path, format="binary")
            return True, f"WVEC dim={t.dim} count={len(t)}"
        if magic == binio.MAGIC_RELC:
            s = load_relation_store(path)
            return True, f"RELC dim={s.dim} count={len(s)}"
        if magic == binio.MAGIC_INFC:
            c = load_classifier(path)
            return True, f"INFC dim={c.dim}"
        if magic == binio.MAGIC_COND:
            m = load_condenser(path)
            return True, f"COND d={m.dims[0]} m={m.dims[1]}"
        return False, f"unknown magic {magic!r}"
    except RelchainError as exc:
        return False, str(exc)


def _cmd_export_check(args) -> int:
    failures = 0
    for path in args.files:
        ok, detail = _check_one(path)
        print(f"{'OK  ' if ok else 'FAIL'} {path}: {detail}")
        if not ok:
            failures += 1
    if failures:
        print(f"{failures} of {len(args.files)} files failed validation", file=sys.stderr)
        return 2
    return 0


def _cmd_ingest_kg(args, cfg: Config) -> int:
    language = args.language or cfg.language
    exclusions = set(args.exclude) if args.exclude is not None else set(cfg.excluded_relations)
    graph = ingest_kg(args.edges, exclusions=exclusions, language=language)
    write_graph(graph, args.out)
    print(f"wrote {graph.edge_count} edges over {len(graph.concepts())} concepts to {args.out}")
    return 0


def _cmd_train_inf(args, cfg: Config) -> int:
    store = load_relation_store(args.store)
    data = load_labeled_pairs(args.pairs)
    clf_cfg = ClassifierConfig(
        lr=args.lr if args.lr is not None else cfg.classifier.lr,
        epochs=args.epochs if args.epochs is not None else cfg.classifier.epochs,
        l2=args.l2 if args.l2 is not None else cfg.classifier.l2,
        seed=cfg.classifier.seed if args.seed is None else args.seed)
    positives = [p for p in data if p.label == 1]
    negatives = [p for p in data if p.label == 0]
    if not negatives:
        logger.info("no negatives in %s; corrupting %d positives", args.pairs, len(positives))
        negatives = corrupt_negatives(positives, seed=clf_cfg.seed)
        negatives = [p for p in negatives if (p.a, p.b) in store]
    clf = train_classifier(positives + negatives, store, clf_cfg)
    write_classifier(clf, args.out)
    print(f"trained on {len(positives)} positives / {len(negatives)} negatives; "
          f"final loss {clf.loss_log[-1]:.4f}" if clf.loss_log else "trained (0 epochs)")
    print(f"wrote {args.out}")
    return 0


def _cmd_augment(args, cfg: Config) -> int:
    graph = load_graph(args.graph)
    store = load_relation_store(args.store)
    clf = load_classifier(args.clf)
    tables = [load_word_vectors(p, format="binary") for p in args.vectors]
    words = [normalize(w) for w in Path(args.words).read_text(encoding="utf-8").split()
             if w.strip()]
    k = args.k if args.k is not None else cfg.mlp_top_k
    threshold = args.threshold if args.threshold is not None else cfg.mlp_threshold
    result = augment_graph(graph, words, tables, store, clf, k=k, threshold=threshold)
    write_graph(graph, args.out)
    if args.needed_pairs:
        with open(args.needed_pairs, "w", encoding="utf-8") as f:
            for a, b in result.missing_pairs:
                f.write(f"{a}\t{b}\n")
        print(f"wrote {len(result.missing_pairs)} needed pairs to {args.needed_pairs}")
    print(f"added {result.edges_added} predicted edges "
          f"({len(result.words_missing)} words absent from every table); wrote {args.out}")
    return 0


def _load_train_pairs(args, graph: ConceptGraph, seed: int) -> list[tuple[str, str]]:
    if args.pairs:
        pairs = []
        with open(args.pairs, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                parts = stripped.split("\t")
                if len(parts) < 2:
                    raise RelchainError(f"{args.pairs}:{lineno}: expected 2 columns")
                pairs.append((normalize(parts[0]), normalize(parts[1])))
        return pairs
    if args.from_graph:
        import numpy as np
        kg_pairs = sorted({(e.head, e.tail) for e in graph.edges()
                           if e.provenance == "kg"})
        if len(kg_pairs) > args.from_graph:
            rng = np.random.default_rng(seed)
            idx = rng.choice(len(kg_pairs), size=args.from_graph, replace=False)
            kg_pairs = [kg_pairs[i] for i in sorted(idx)]
        return kg_pairs
    raise _UsageError("train-cond needs --pairs or --from-graph")


def _cmd_train_cond(args, cfg: Config) -> int:
    graph = load_graph(args.graph)
    store = load_relation_store(args.store)
    clf = load_classifier(args.clf)
    table = load_word_vectors(args.smooth_vectors, format="binary") \
        if args.smooth_vectors else None
    base = cfg.condenser
    train_cfg = TrainConfig(
        lr=args.lr if args.lr is not None else base.lr,
        epochs=args.epochs if args.epochs is not None else base.epochs,
        batch_size=args.batch_size if args.batch_size is not None else base.batch_size,
        seed=args.seed if args.seed is not None else base.seed,
        inf_threshold=args.threshold if args.threshold is not None else base.inf_threshold,
        beta1=base.beta1, beta2=base.beta2, eps=base.eps)
    latent = args.latent_dim if args.latent_dim is not None else cfg.latent_dim
    pairs = _load_train_pairs(args, graph, train_cfg.seed)
    result = train_condenser(pairs, graph, store, clf, train_cfg, latent_dim=latent,
                             table=table, smoothing=cfg.smoothing, cap=cfg.chain_cap,
                             n_smooth=cfg.smoothing_neighbors)
    write_condenser(result.model, args.out, metadata=result.sidecar(train_cfg, latent))
    print(f"trained on {result.n_train} pairs ({result.n_val} validation); "
          f"final val loss {result.val_losses[-1]:.4f}")
    print(f"wrote {args.out} (+ sidecar)")
    return 0


def _make_solver(args, cfg: Config):
    """Build (solver callable, method label, store, clf) from CLI flags."""
    store = load_relation_store(args.store)
    clf = load_classifier(args.clf) if args.clf else None
    model: CondenserModel | None = load_condenser(args.model) if args.model else None
    graph = load_graph(args.graph) if args.graph else None
    table = load_word_vectors(args.smooth_vectors, format="binary") \
        if args.smooth_vectors else None
    method = args.method
    needs_graph = method != "relbert"
    if needs_graph and graph is None:
        raise _UsageError(f"method {method} requires --graph")
    if method in ("condensed", "direct-sim2", "hybrid-condensed") and model is None:
        raise _UsageError(f"method {method} requires --model")
    if method.startswith("hybrid") and clf is None:
        raise _UsageError(f"method {method} requires --clf")
    ctx = ChainContext(graph=graph, store=store, clf=clf, table=table,
                       smoothing=cfg.smoothing, cap=cfg.chain_cap,
                       n_smooth=cfg.smoothing_neighbors) if graph is not None else None
    tau = args.tau if args.tau is not None else cfg.hybrid_tau

    def solver(q):
        if method == "relbert":
            return solve_relbert(q, store)
        if method == "condensed":
            return solve_condensed(q, ctx, model)
        if method == "direct":
            return solve_direct(q, ctx, sim="sim1", model=model)
        if method == "direct-sim2":
            return solve_direct(q, ctx, sim="sim2", model=model)
        if method == "direct-sim3":
            return solve_direct(q, ctx, sim="sim3", model=model)
        if method == "cn-types":
            return solve_cn_types(q, graph)
        if method == "hybrid-condensed":
            return solve_hybrid(q, tau, ctx, chain_method="condensed", model=model)
        if method == "hybrid-direct":
            return solve_hybrid(q, tau, ctx, chain_method="direct", model=model, sim="sim1")
        raise AssertionError(method)

    if args.explain:
        if ctx is None:
            raise _UsageError("--explain requires --graph")
        base_solver = solver

        def solver(q):  # noqa: F811 - deliberate wrap
            verdict = base_solver(q)
            try:
                c, z = explain(q, verdict, ctx, model=model)
            except RelchainError:
                return verdict
            return replace(verdict, explanation=(c, z))

    label = f"{method}<{tau:g}" if method.startswith("hybrid") else method
    return solver, label, store, clf


def _cmd_solve_eval(args, cfg: Config, write_only: bool) -> int:
    solver, label, store, clf = _make_solver(args, cfg)
    threads = args.threads if args.threads is not None else cfg.threads
    reports = []
    all_records = []
    for ds_path in args.dataset:
        ds = load_dataset(ds_path)
        result = evaluate(ds, solver, store, clf=clf, bounds=cfg.buckets,
                          threads=threads, method=label)
        reports.append(result.report)
        all_records.extend(result.records)
    if write_only:
        write_records(all_records, args.out)
        print(f"wrote {len(all_records)} verdicts to {args.out}")
        return 0
    if args.out_verdicts:
        write_records(all_records, args.out_verdicts)
    print(render_text(reports))
    if args.csv:
        Path(args.csv).write_text(render_csv(reports), encoding="utf-8")
        print(f"wrote CSV report to {args.csv}")
    return 0


def _cmd_report(args, cfg: Config) -> int:
    records = []
    for path in args.verdicts:
        records.extend(read_records(path))
    if not records:
        raise RelchainError("no verdict records found")
    groups: dict[tuple[str, str], list] = {}
    for rec in records:
        groups.setdefault((rec.dataset, rec.method), []).append(rec)
    reports = [report_from_records(recs, dataset=ds, method=m, bounds=cfg.buckets)
               for (ds, m), recs in sorted(groups.items())]
    print(render_text(reports))
    if args.csv:
        Path(args.csv).write_text(render_csv(reports), encoding="utf-8")
        print(f"wrote CSV report to {args.csv}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        cfg = load_config(args.config)
        if args.command == "ingest-kg":
            return _cmd_ingest_kg(args, cfg)
        if args.command == "export-check":
            return _cmd_export_check(args)
        if args.command == "train-inf":
            return _cmd_train_inf(args, cfg)
        if args.command == "augment":
            return _cmd_augment(args, cfg)
        if args.command == "train-cond":
            return _cmd_train_cond(args, cfg)
        if args.command == "solve":
            return _cmd_solve_eval(args, cfg, write_only=True)
        if args.command == "eval":
            return _cmd_solve_eval(args, cfg, write_only=False)
        if args.command == "report":
            return _cmd_report(args, cfg)
        raise AssertionError(args.command)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RelchainError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
