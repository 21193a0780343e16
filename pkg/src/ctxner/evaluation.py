"""Entity-level evaluation and experiment orchestration.

Experiments sweep retrieval configurations over 5 document folds, repeat
nondeterministic methods over several runs with derived seeds, and aggregate
micro-averaged precision/recall/F1 overall and per book.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Document, Sentence, decode_bio
from .errors import ConfigError, ContractViolation, CtxnerError
from .retrieval import (
    Candidate,
    ContextWindow,
    HeuristicNounTagger,
    build_bm25_index,
    bm25_topn,
    candidate_buckets,
    pool_candidates,
    samenoun_topn,
    window_indices,
)
from .rerank import (
    ScorerSpec,
    assemble_context,
    bucket_random_topk,
    make_scorer,
    rank_topk,
    score_batch,
)
from .nerbridge import predict_query_tags

RETRIEVAL_METHODS = ("no_retrieval", "surrounding", "bm25", "samenoun", "neural_pool")

DETERMINISTIC_METHODS = ("no_retrieval", "surrounding", "bm25")


# ---------------------------------------------------------------------------
# metric

@dataclass(frozen=True)
class Prf:
    precision: float
    recall: float
    f1: float
    n_gold: int
    n_pred: int
    n_match: int
    precision_undefined: bool = False
    recall_undefined: bool = False


def _entity_set(tag_lists: list[list[str]]) -> set[tuple[int, int, int, str]]:
    out = set()
    for sent_idx, tags in enumerate(tag_lists):
        for start, end, cls in decode_bio(tags):
            out.add((sent_idx, start, end, cls))
    return out


def prf_from_counts(n_match: int, n_pred: int, n_gold: int) -> Prf:
    precision = n_match / n_pred if n_pred else 0.0
    recall = n_match / n_gold if n_gold else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return Prf(precision, recall, f1, n_gold, n_pred, n_match,
               precision_undefined=n_pred == 0, recall_undefined=n_gold == 0)


def entity_prf(gold: list[list[str]], pred: list[list[str]]) -> Prf:
    """Exact-span, exact-class matching with lenient BIO decoding."""
    if len(gold) != len(pred) or any(
        len(g) != len(p) for g, p in zip(gold, pred)
    ):
        raise ContractViolation("gold/pred shapes do not match")
    gold_set = _entity_set(gold)
    pred_set = _entity_set(pred)
    return prf_from_counts(len(gold_set & pred_set), len(pred_set), len(gold_set))


# ---------------------------------------------------------------------------
# folds

@dataclass(frozen=True)
class FoldPlan:
    fold_count: int
    assignment: dict[str, int]
    seed: int

    def docs_in_fold(self, fold: int) -> list[str]:
        return sorted(d for d, f in self.assignment.items() if f == fold)


def make_folds(docs: list[Document], fold_count: int = 5, seed: int = 0) -> FoldPlan:
    """Seeded shuffle then round-robin; fold sizes differ by at most one."""
    if fold_count > len(docs):
        raise ContractViolation(
            f"fold_count {fold_count} exceeds document count {len(docs)}"
        )
    ids = sorted(d.doc_id for d in docs)
    random.Random(seed).shuffle(ids)
    assignment = {doc_id: pos % fold_count for pos, doc_id in enumerate(ids)}
    return FoldPlan(fold_count, assignment, seed)


# ---------------------------------------------------------------------------
# experiment configuration

@dataclass(frozen=True)
class ExperimentConfig:
    method: str
    scorer: ScorerSpec | None = None
    n: int = 8
    k: int = 3
    window: ContextWindow = ContextWindow.FULL_BOOK
    runs: int | None = None  # default: 3 for nondeterministic methods, else 1
    seed: int = 0
    fold_count: int = 5
    k1: float = 1.5
    b: float = 0.75

    def __post_init__(self):
        if self.method not in RETRIEVAL_METHODS:
            raise ConfigError(f"unknown retrieval method {self.method!r}")
        if self.method != "no_retrieval" and self.k < 1:
            raise ConfigError("k must be >= 1")
        if (self.scorer is not None) != (self.method == "neural_pool"):
            raise ConfigError("scorer is required iff method is neural_pool")
        if self.runs is not None and self.runs < 1:
            raise ConfigError("runs must be >= 1")

    @property
    def deterministic(self) -> bool:
        if self.method in DETERMINISTIC_METHODS:
            return True
        return False

    @property
    def effective_runs(self) -> int:
        if self.runs is not None:
            return self.runs
        return 1 if self.deterministic else 3

    @property
    def config_id(self) -> str:
        parts = [self.method]
        if self.scorer is not None:
            parts.append(self.scorer.kind)
        parts.append(f"n{self.n}")
        parts.append(f"k{self.k}")
        parts.append(self.window.value)
        return "-".join(parts)


def derive_seed(base_seed: int, config_id: str, fold: int, run: int) -> int:
    digest = hashlib.sha256(f"{base_seed}|{config_id}|{fold}|{run}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


# ---------------------------------------------------------------------------
# report

@dataclass(frozen=True)
class ReportRow:
    config_id: str
    k: int
    fold: int
    run: int
    book: str  # doc_id or "ALL"
    n_gold: int
    n_pred: int
    n_match: int
    precision: float
    recall: float
    f1: float


@dataclass
class EvalReport:
    config_id: str
    k: int
    book_rows: list[ReportRow] = field(default_factory=list)
    fold_rows: list[ReportRow] = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)


def _row(config_id: str, k: int, fold: int, run: int, book: str,
         n_match: int, n_pred: int, n_gold: int) -> ReportRow:
    p = prf_from_counts(n_match, n_pred, n_gold)
    return ReportRow(config_id, k, fold, run, book, n_gold, n_pred, n_match,
                     p.precision, p.recall, p.f1)


# ---------------------------------------------------------------------------
# pipeline

def _surrounding_select(doc: Document, window: ContextWindow,
                        query: Sentence, k: int) -> list[Candidate]:
    """k nearest neighbours of the query, closer first, before wins ties."""
    win = window_indices(doc, window)
    out = []
    dist = 1
    while len(out) < k:
        before_idx = query.index - dist
        after_idx = query.index + dist
        hit = False
        if before_idx >= win.start:
            out.append(Candidate(doc.doc_id, before_idx, "before", 1.0 / dist))
            hit = True
        if len(out) < k and after_idx < win.stop:
            out.append(Candidate(doc.doc_id, after_idx, "after", 1.0 / dist))
            hit = True
        if not hit:
            break
        dist += 1
    return out[:k]


def select_context(
    config: ExperimentConfig,
    doc: Document,
    query: Sentence,
    run_seed: int,
    bm25_index=None,
    tagger=None,
    scorer=None,
) -> list[Candidate]:
    """Apply the configured retrieval method to one query sentence."""
    if config.method == "no_retrieval":
        return []
    if config.method == "surrounding":
        return _surrounding_select(doc, config.window, query, config.k)
    if config.method == "bm25":
        index = bm25_index or build_bm25_index(doc, config.window, config.k1, config.b)
        return bm25_topn(index, query, config.k)
    if config.method == "samenoun":
        return samenoun_topn(doc, config.window, query, config.k, run_seed, tagger)
    # neural_pool
    if config.scorer.kind == "bucket_random":
        buckets = candidate_buckets(
            doc, config.window, query, config.n, run_seed,
            config.k1, config.b, bm25_index, tagger,
        )
        pick_seed = derive_seed(run_seed, "bucket_pick", query.index, 0)
        return bucket_random_topk(buckets, config.k, pick_seed)
    pool = pool_candidates(
        doc, config.window, query, config.n, run_seed,
        config.k1, config.b, bm25_index, tagger,
    )
    if not pool:
        return []
    scorer = scorer if scorer is not None else make_scorer(config.scorer)
    scores = score_batch(scorer, query, pool, doc)
    return rank_topk(pool, scores, config.k)


def _eval_sentence(config, doc, query, run_seed, predictor,
                   bm25_index, tagger, scorer) -> tuple[list[str], list[str]]:
    try:
        selected = select_context(
            config, doc, query, run_seed, bm25_index, tagger, scorer
        )
        context = assemble_context(query, selected, doc)
        pred = predict_query_tags(predictor, context)
    except CtxnerError as exc:
        raise CtxnerError(
            f"failure at doc={doc.doc_id} sentence={query.index} "
            f"stage={type(exc).__name__}: {exc}"
        ) from exc
    return query.tags, pred


def run_experiment(
    config: ExperimentConfig,
    corpus: list[Document],
    predictor,
    workers: int = 1,
) -> EvalReport:
    """Evaluate every annotated sentence of every fold under one config."""
    plan = make_folds(corpus, config.fold_count, config.seed)
    by_id = {d.doc_id: d for d in corpus}
    scorer = None
    if config.scorer is not None and config.scorer.kind not in ("bucket_random",):
        scorer = make_scorer(config.scorer)

    report = EvalReport(config.config_id, config.k)
    pooled: dict[int, list[int]] = {}  # run -> [match, pred, gold]
    needs_retrieval = config.method != "no_retrieval"
    caches: dict[str, tuple] = {}
    for doc_id in sorted(by_id):
        doc = by_id[doc_id]
        if needs_retrieval:
            index = (
                build_bm25_index(doc, config.window, config.k1, config.b)
                if config.method in ("bm25", "neural_pool")
                else None
            )
            tagger = (
                HeuristicNounTagger(doc)
                if config.method in ("samenoun", "neural_pool")
                else None
            )
        else:
            index = tagger = None
        caches[doc_id] = (index, tagger)

    for fold in range(plan.fold_count):
        for run in range(config.effective_runs):
            run_seed = derive_seed(config.seed, config.config_id, fold, run)
            fold_counts = [0, 0, 0]
            for doc_id in plan.docs_in_fold(fold):
                doc = by_id[doc_id]
                index, tagger = caches[doc_id]
                queries = doc.annotated_sentences

                def work(query):
                    return _eval_sentence(
                        config, doc, query, run_seed, predictor,
                        index, tagger, scorer,
                    )

                if workers > 1:
                    with ThreadPoolExecutor(max_workers=workers) as pool:
                        results = list(pool.map(work, queries))
                else:
                    results = [work(q) for q in queries]
                gold = [g for g, _ in results]
                pred = [p for _, p in results]
                p = entity_prf(gold, pred)
                report.book_rows.append(
                    _row(config.config_id, config.k, fold, run, doc_id,
                         p.n_match, p.n_pred, p.n_gold)
                )
                fold_counts[0] += p.n_match
                fold_counts[1] += p.n_pred
                fold_counts[2] += p.n_gold
            report.fold_rows.append(
                _row(config.config_id, config.k, fold, run, "ALL", *fold_counts)
            )
            run_totals = pooled.setdefault(run, [0, 0, 0])
            for i in range(3):
                run_totals[i] += fold_counts[i]

    run_prfs = [
        prf_from_counts(*pooled[run]) for run in sorted(pooled)
    ]
    report.aggregate = {
        "precision": sum(p.precision for p in run_prfs) / len(run_prfs),
        "recall": sum(p.recall for p in run_prfs) / len(run_prfs),
        "f1": sum(p.f1 for p in run_prfs) / len(run_prfs),
        "runs": config.effective_runs,
        "folds": plan.fold_count,
    }
    return report


# ---------------------------------------------------------------------------
# report emission

REPORT_FORMATS = ("csv", "json")

_BOOK_COLUMNS = ("config_id", "k", "fold", "run", "book", "n_gold", "n_pred",
                 "n_match", "precision", "recall", "f1")
_CURVE_COLUMNS = ("config_id", "k", "precision", "recall", "f1")
_SUMMARY_COLUMNS = ("config_id", "k", "precision", "recall", "f1", "runs", "folds")


def _rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([row[c] for c in columns])
    return buf.getvalue()


def emit_report(
    reports: list[EvalReport], out_dir: str | Path, formats=("csv", "json")
) -> list[Path]:
    """Write per-book, per-k-curve and summary tables; reruns are byte-stable."""
    for fmt in formats:
        if fmt not in REPORT_FORMATS:
            raise ConfigError(f"unknown report format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    book_rows = sorted(
        (vars(r) for rep in reports for r in rep.book_rows + rep.fold_rows),
        key=lambda r: (r["config_id"], r["k"], r["fold"], r["run"], r["book"]),
    )
    summary_rows = sorted(
        (
            {"config_id": rep.config_id, "k": rep.k, **{
                c: rep.aggregate[c] for c in ("precision", "recall", "f1",
                                              "runs", "folds")
            }}
            for rep in reports
        ),
        key=lambda r: (r["config_id"], r["k"]),
    )
    curve_rows = [
        {c: row[c] for c in _CURVE_COLUMNS} for row in summary_rows
    ]
    tables = {
        "per_book": (_BOOK_COLUMNS, book_rows),
        "curves": (_CURVE_COLUMNS, curve_rows),
        "summary": (_SUMMARY_COLUMNS, summary_rows),
    }
    written = []
    for name, (columns, rows) in tables.items():
        if "csv" in formats:
            path = out / f"{name}.csv"
            path.write_text(_rows_to_csv(columns, rows), encoding="utf-8")
            written.append(path)
        if "json" in formats:
            path = out / f"{name}.json"
            path.write_text(
                json.dumps(rows, sort_keys=True, indent=2) + "\n", encoding="utf-8"
            )
            written.append(path)
    return written
