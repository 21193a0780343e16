#!/usr/bin/env python3
"""Compare retrieval methods end to end on the demo corpus.

Generates the synthetic pair dataset with the mock LLM, trains the lexical
scorer, runs every retrieval method at the same n and k, and prints one
micro-averaged P/R/F1 line per method. Reports land in <out>/reports.

Usage: python3 scripts/run_method_comparison.py [--out demo] [--n 8] [--k 3]
"""

from __future__ import annotations

import argparse
import subprocess
import sys
from pathlib import Path

from ctxner.config import load_config
from ctxner.corpus import load_ner_corpus
from ctxner.datagen import (
    MockLlmClient,
    assemble_dataset,
    generate_positives,
    negative_sampling,
    positive_swap,
)
from ctxner.evaluation import ExperimentConfig, emit_report, run_experiment
from ctxner.nerbridge import MockGazetteerPredictor, load_gazetteer
from ctxner.rerank import ScorerSpec, train_lexical_scorer


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="demo")
    parser.add_argument("--n", type=int, default=8)
    parser.add_argument("--k", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    out = Path(args.out)

    if not (out / "config.toml").exists():
        subprocess.run(
            [sys.executable, Path(__file__).parent / "make_demo_corpus.py",
             "--out", str(out)],
            check=True,
        )
    cfg = load_config(out / "config.toml")
    docs = load_ner_corpus(cfg["corpus"]["dir"])
    predictor = MockGazetteerPredictor(
        load_gazetteer(cfg["ner"]["gazetteer"]), context_rule=True
    )

    positives, _ = generate_positives(docs, MockLlmClient(), args.seed)
    swapped, _ = positive_swap(positives, args.seed)
    sampled = negative_sampling(docs, len(positives), args.seed)
    train, _ = assemble_dataset(positives, sampled + swapped, 0.1, args.seed)
    model_path = out / "lexical_scorer.json"
    train_lexical_scorer(train, model_path=model_path)

    configs = [
        ExperimentConfig(method="no_retrieval", seed=args.seed),
        ExperimentConfig(method="surrounding", k=args.k, seed=args.seed),
        ExperimentConfig(method="bm25", n=args.n, k=args.k, seed=args.seed),
        ExperimentConfig(method="samenoun", n=args.n, k=args.k, seed=args.seed),
        ExperimentConfig(method="neural_pool", n=args.n, k=args.k,
                         seed=args.seed,
                         scorer=ScorerSpec("bucket_random", seed=args.seed)),
        ExperimentConfig(method="neural_pool", n=args.n, k=args.k,
                         seed=args.seed,
                         scorer=ScorerSpec("random", seed=args.seed)),
        ExperimentConfig(method="neural_pool", n=args.n, k=args.k,
                         seed=args.seed,
                         scorer=ScorerSpec("lexical",
                                           model_path=str(model_path))),
    ]
    reports = []
    for config in configs:
        report = run_experiment(config, docs, predictor, workers=4)
        reports.append(report)
        agg = report.aggregate
        print(
            f"{report.config_id:<50} "
            f"P={agg['precision']:.4f} R={agg['recall']:.4f} "
            f"F1={agg['f1']:.4f}"
        )
    written = emit_report(reports, out / "reports")
    for path in written:
        print(path, file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
