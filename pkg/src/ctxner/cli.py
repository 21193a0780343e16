"""Command-line entry point.

Subcommands: validate-corpus, gen-dataset, train-scorer, run-eval, dump-pool,
score. A declarative TOML config drives everything; flags override fields.
Diagnostics go to stderr, data to stdout or declared files. Exit codes:
0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import datagen, evaluation, rerank, retrieval
from .config import (
    endpoint,
    experiment_configs,
    load_config,
    parse_window,
    scorer_spec_from_config,
)
from .errors import ConfigError, CtxnerError
from .nerbridge import MockGazetteerPredictor, RemoteNerPredictor, load_gazetteer


def _load_corpus(cfg: dict):
    corpus_dir = cfg.get("corpus", {}).get("dir")
    if not corpus_dir:
        raise ConfigError("config is missing corpus.dir")
    return corpus_mod.load_ner_corpus(corpus_dir)


def _make_predictor(cfg: dict, ner_endpoint: str | None):
    url = endpoint(cfg, "ner", ner_endpoint)
    if url:
        return RemoteNerPredictor(url)
    ner_cfg = cfg.get("ner", {})
    gazetteer_path = ner_cfg.get("gazetteer")
    if not gazetteer_path:
        raise ConfigError("need endpoints.ner or ner.gazetteer in the config")
    return MockGazetteerPredictor(
        load_gazetteer(gazetteer_path), context_rule=bool(ner_cfg.get("context_rule"))
    )


def cmd_validate_corpus(args) -> int:
    cfg = load_config(args.config)
    docs = _load_corpus(cfg)
    total = sum(len(d.sentences) for d in docs)
    print(f"{len(docs)} documents, {total} sentences")
    return 0


def cmd_gen_dataset(args) -> int:
    cfg = load_config(args.config)
    docs = _load_corpus(cfg)
    gen = cfg.get("datagen", {})
    seed = args.seed if args.seed is not None else int(gen.get("seed", 0))
    llm_url = endpoint(cfg, "llm", args.llm_endpoint)
    if not llm_url:
        raise ConfigError("gen-dataset needs --llm-endpoint or endpoints.llm")
    if llm_url == "mock":
        client = datagen.MockLlmClient(miss_rate=float(gen.get("mock_miss_rate", 0.0)))
    else:
        client = datagen.HttpLlmClient(llm_url)
    positives, report = datagen.generate_positives(
        docs, client, seed, parallelism=args.workers
    )
    sampled = datagen.negative_sampling(docs, len(positives), seed)
    swapped, swap_skipped = datagen.positive_swap(positives, seed)
    report.skipped.extend(f"swap:{s}" for s in swap_skipped)
    train, evals = datagen.assemble_dataset(
        positives, sampled + swapped, float(gen.get("eval_fraction", 0.1)), seed
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    datagen.write_dataset(train + evals, out_dir / "dataset.jsonl")
    datagen.write_report(report, out_dir / "generation_report.json")
    print(
        f"wrote {len(train)} train / {len(evals)} eval examples "
        f"({report.accepted} positives accepted, {report.filtered} filtered, "
        f"{len(report.skipped)} skipped)",
        file=sys.stderr,
    )
    print(out_dir / "dataset.jsonl")
    return 0


def cmd_train_scorer(args) -> int:
    cfg = load_config(args.config)
    dataset = datagen.read_dataset(cfg.get("scorer", {}).get("dataset", args.dataset))
    train = [ex for ex in dataset if ex.split != "eval"]
    path = rerank.train_lexical_scorer(
        train, epochs=args.epochs, lr=args.lr, model_path=args.out
    )
    print(path)
    return 0


def cmd_run_eval(args) -> int:
    cfg = load_config(args.config)
    docs = _load_corpus(cfg)
    overrides = {
        "n": args.n,
        "k": args.k,
        "seed": args.seed,
        "runs": args.runs,
        "window": args.window,
        "scorer_endpoint": args.scorer_endpoint,
    }
    configs = experiment_configs(cfg, overrides)
    predictor = _make_predictor(cfg, args.ner_endpoint)
    for config in configs:
        if config.scorer is not None and config.scorer.kind == "remote":
            client = rerank.RemoteScorer(config.scorer.endpoint)
            if not client.healthy():
                raise CtxnerError(
                    f"scorer endpoint unreachable: {config.scorer.endpoint}"
                )
    reports = [
        evaluation.run_experiment(config, docs, predictor, workers=args.workers)
        for config in configs
    ]
    written = evaluation.emit_report(reports, args.out_dir)
    for rep in reports:
        agg = rep.aggregate
        print(
            f"{rep.config_id}: P={agg['precision']:.4f} R={agg['recall']:.4f} "
            f"F1={agg['f1']:.4f}",
            file=sys.stderr,
        )
    for path in written:
        print(path)
    return 0


def cmd_dump_pool(args) -> int:
    cfg = load_config(args.config)
    docs = _load_corpus(cfg)
    window = parse_window(args.window or cfg.get("experiment", {}).get("window", "book"))
    seed = args.seed if args.seed is not None else 0
    n = args.n if args.n is not None else 8
    out = sys.stdout
    for doc in docs:
        index = retrieval.build_bm25_index(doc, window)
        tagger = retrieval.HeuristicNounTagger(doc)
        for query in doc.annotated_sentences:
            pool = retrieval.pool_candidates(
                doc, window, query, n, seed, bm25_index=index, tagger=tagger
            )
            for line in retrieval.dump_pool_records(query, pool):
                out.write(line + "\n")
    return 0


def cmd_score(args) -> int:
    if args.scorer == "remote":
        spec = rerank.ScorerSpec("remote", endpoint=args.endpoint)
    elif args.scorer == "lexical":
        spec = rerank.ScorerSpec("lexical", model_path=args.model)
    else:
        spec = rerank.ScorerSpec("random", seed=args.seed or 0)
    scorer = rerank.make_scorer(spec)
    score = scorer.score_pairs([(args.query, args.context)])[0]
    print(f"{score:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxner",
        description="Document-level context retrieval engine for NER",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)

    p = sub.add_parser("validate-corpus", help="load and validate the corpus")
    common(p)
    p.set_defaults(func=cmd_validate_corpus)

    p = sub.add_parser("gen-dataset", help="generate the synthetic retrieval dataset")
    common(p)
    p.add_argument("--llm-endpoint", help="LLM completion endpoint, or 'mock'")
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train-scorer", help="train the built-in lexical scorer")
    common(p)
    p.add_argument("--dataset", help="dataset file (overrides scorer.dataset)")
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--out", default="lexical_scorer.json")
    p.set_defaults(func=cmd_train_scorer)

    p = sub.add_parser("run-eval", help="run a retrieval evaluation experiment")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--window", choices=["chapter", "book"])
    p.add_argument("--scorer-endpoint")
    p.add_argument("--ner-endpoint")
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_run_eval)

    p = sub.add_parser("dump-pool", help="dump candidate pools for audit")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--window", choices=["chapter", "book"])
    p.set_defaults(func=cmd_dump_pool)

    p = sub.add_parser("score", help="score one (query, context) pair")
    p.add_argument("query")
    p.add_argument("context")
    p.add_argument("--scorer", choices=["random", "lexical", "remote"],
                   default="random")
    p.add_argument("--seed", type=int)
    p.add_argument("--model")
    p.add_argument("--endpoint")
    p.set_defaults(func=cmd_score)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CtxnerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
