"""Re-rankers over pooled candidates.

Every scorer maps (query text, context text) pairs to relevance in [0, 1]:
seeded random, the trainable lexical model, or a remote cross-encoder reached
over the scoring protocol (POST /v1/score). Selection is top-k with
deterministic tie-breaks; bucket-random draws k/4 per heuristic instead.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import time
from dataclasses import dataclass
from pathlib import Path

import httpx
import numpy as np

from .corpus import Document, Sentence, tokenize
from .datagen import RetrievalExample
from .errors import ContractViolation, ProtocolError, TransportError
from .retrieval import Candidate, SOURCE_PRIORITY, NOUN_SUFFIXES, STOPWORDS, _is_capitalized

REMOTE_BATCH_SIZE = 32

SCORER_KINDS = ("random", "bucket_random", "lexical", "remote")


@dataclass(frozen=True)
class ScorerSpec:
    kind: str
    endpoint: str | None = None
    model_path: str | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in SCORER_KINDS:
            raise ContractViolation(f"unknown scorer kind {self.kind!r}")
        if (self.endpoint is not None) != (self.kind == "remote"):
            raise ContractViolation("endpoint is required iff kind is remote")
        if (self.model_path is not None) != (self.kind == "lexical"):
            raise ContractViolation("model_path is required iff kind is lexical")


@dataclass(frozen=True)
class AssembledContext:
    sentences: tuple[Sentence, ...]
    query_position: int

    @property
    def query(self) -> Sentence:
        return self.sentences[self.query_position]


# ---------------------------------------------------------------------------
# scorers

class RandomScorer:
    """Seeded per-pair uniform scores; stable across calls and threads."""

    def __init__(self, seed: int):
        self.seed = seed

    def score_pairs(self, pairs: list[tuple[str, str]]) -> list[float]:
        out = []
        for query, context in pairs:
            digest = hashlib.sha256(
                f"{self.seed}|{query}|{context}".encode()
            ).digest()
            out.append(int.from_bytes(digest[:8], "big") / 2**64)
        return out


FEATURE_NAMES = (
    "token_overlap",
    "entity_in_context",
    "shared_nouns",
    "context_length",
    "bm25_like",
)


def _text_nouns(tokens: list[str]) -> set[str]:
    nouns = set()
    for pos, word in enumerate(tokens):
        if not word.isalpha() or word.lower() in STOPWORDS:
            continue
        if pos > 0 and _is_capitalized(word):
            nouns.add(word.lower())
        elif word.islower() and len(word) >= 4 and word.endswith(NOUN_SUFFIXES):
            nouns.add(word)
    return nouns


def pair_features(query: str, context: str, k1: float = 1.5) -> list[float]:
    q_toks = tokenize(query)
    c_toks = tokenize(context)
    q_low = {t.lower() for t in q_toks}
    c_low = {t.lower() for t in c_toks}
    overlap = len(q_low & c_low)
    cap_terms = {t for t in q_toks if t.isalpha() and _is_capitalized(t)
                 and t.lower() not in STOPWORDS}
    entity_hit = float(any(t in c_toks for t in cap_terms))
    shared_nouns = len(_text_nouns(q_toks) & _text_nouns(c_toks))
    tf = {}
    for t in c_toks:
        t = t.lower()
        tf[t] = tf.get(t, 0) + 1
    bm25_like = sum(
        tf[t] * (k1 + 1.0) / (tf[t] + k1) for t in q_low if t in tf
    )
    return [float(overlap), entity_hit, float(shared_nouns),
            float(len(c_toks)), bm25_like]


def logistic_loss_and_grad(
    params: np.ndarray, features: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of a logistic model and its analytic gradient.

    ``params`` is [bias, w_1..w_d]; ``features`` is (n, d).
    """
    z = params[0] + features @ params[1:]
    # log(1 + e^z) computed stably
    loss = float(np.mean(np.logaddexp(0.0, z) - labels * z))
    p = 1.0 / (1.0 + np.exp(-z))
    residual = p - labels
    grad = np.empty_like(params)
    grad[0] = float(np.mean(residual))
    grad[1:] = features.T @ residual / len(labels)
    return loss, grad


class LexicalScorer:
    """Logistic model over cheap lexical features of a (query, context) pair."""

    def __init__(self, params: np.ndarray, mean: np.ndarray, std: np.ndarray):
        self.params = np.asarray(params, dtype=float)
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.asarray(std, dtype=float)

    @classmethod
    def load(cls, path: str | Path) -> "LexicalScorer":
        blob = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(np.array(blob["params"]), np.array(blob["mean"]),
                   np.array(blob["std"]))

    def save(self, path: str | Path) -> None:
        blob = {
            "feature_names": list(FEATURE_NAMES),
            "params": self.params.tolist(),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
        }
        Path(path).write_text(json.dumps(blob, indent=2) + "\n", encoding="utf-8")

    def score_pairs(self, pairs: list[tuple[str, str]]) -> list[float]:
        feats = np.array([pair_features(q, c) for q, c in pairs], dtype=float)
        feats = (feats - self.mean) / self.std
        z = self.params[0] + feats @ self.params[1:]
        return [float(v) for v in 1.0 / (1.0 + np.exp(-z))]


def train_lexical_scorer(
    dataset: list[RetrievalExample],
    epochs: int = 300,
    lr: float = 0.5,
    model_path: str | Path = "lexical_scorer.json",
) -> str:
    """Fit the lexical scorer by full-batch gradient descent on cross-entropy."""
    labels = np.array([ex.label for ex in dataset], dtype=float)
    if len(set(labels.tolist())) < 2:
        raise ContractViolation("training dataset must contain both labels")
    feats = np.array(
        [pair_features(ex.query_text, ex.context_text) for ex in dataset], dtype=float
    )
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std[std == 0.0] = 1.0
    feats = (feats - mean) / std
    params = np.zeros(feats.shape[1] + 1)
    for _ in range(epochs):
        _, grad = logistic_loss_and_grad(params, feats, labels)
        params -= lr * grad
    LexicalScorer(params, mean, std).save(model_path)
    return str(model_path)


class RemoteScorer:
    """Client for the scoring protocol: POST /v1/score, GET /v1/health."""

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 3,
                 backoff: float = 0.5, pool_connections: int = 4):
        self.endpoint = endpoint.rstrip("/")
        self.retries = retries
        self.backoff = backoff
        limits = httpx.Limits(max_connections=pool_connections)
        self._client = httpx.Client(timeout=timeout, limits=limits)

    def healthy(self) -> bool:
        try:
            resp = self._client.get(f"{self.endpoint}/v1/health")
            return resp.status_code == 200 and resp.json().get("status") == "ok"
        except httpx.HTTPError:
            return False

    def _post_batch(self, batch: list[tuple[str, str]]) -> list[float]:
        payload = {"pairs": [{"query": q, "context": c} for q, c in batch]}
        last = None
        for attempt in range(self.retries):
            try:
                resp = self._client.post(f"{self.endpoint}/v1/score", json=payload)
                if resp.status_code != 200:
                    raise ProtocolError(
                        f"scorer {self.endpoint} returned {resp.status_code}: "
                        f"{resp.text[:200]}"
                    )
                scores = resp.json()["scores"]
                break
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last = exc
                time.sleep(self.backoff * 2**attempt)
        else:
            raise TransportError(f"scorer endpoint {self.endpoint} failed: {last}")
        if len(scores) != len(batch):
            raise ProtocolError(
                f"scorer returned {len(scores)} scores for {len(batch)} pairs"
            )
        for s in scores:
            if not isinstance(s, (int, float)) or not 0.0 <= s <= 1.0:
                raise ProtocolError(f"score {s!r} outside [0, 1]")
        return [float(s) for s in scores]

    def score_pairs(self, pairs: list[tuple[str, str]]) -> list[float]:
        out = []
        for i in range(0, len(pairs), REMOTE_BATCH_SIZE):
            out.extend(self._post_batch(pairs[i : i + REMOTE_BATCH_SIZE]))
        return out


def make_scorer(spec: ScorerSpec):
    if spec.kind == "random":
        return RandomScorer(spec.seed if spec.seed is not None else 0)
    if spec.kind == "lexical":
        return LexicalScorer.load(spec.model_path)
    if spec.kind == "remote":
        return RemoteScorer(spec.endpoint)
    raise ContractViolation(f"{spec.kind!r} is not a pointwise scorer")


def score_batch(
    scorer, query: Sentence, candidates: list[Candidate], doc: Document
) -> list[float]:
    """One relevance score per candidate, order-aligned with the input."""
    if not candidates:
        raise ContractViolation("score_batch requires a non-empty candidate list")
    if isinstance(scorer, ScorerSpec):
        scorer = make_scorer(scorer)
    pairs = [(query.text, doc.sentences[c.index].text) for c in candidates]
    scores = scorer.score_pairs(pairs)
    for s in scores:
        if not 0.0 <= s <= 1.0:
            raise ProtocolError(f"scorer produced out-of-range value {s}")
    return scores


# ---------------------------------------------------------------------------
# selection

def rank_topk(candidates: list[Candidate], scores: list[float], k: int) -> list[Candidate]:
    if k < 1:
        raise ContractViolation("k must be >= 1")
    if len(scores) != len(candidates):
        raise ContractViolation("scores and candidates must align")
    order = sorted(range(len(candidates)),
                   key=lambda i: (-scores[i], candidates[i].index))
    return [candidates[i] for i in order[:k]]


def bucket_random_topk(
    pool_by_source: dict[str, list[Candidate]], k: int, seed: int
) -> list[Candidate]:
    """k/4 random picks per heuristic bucket, remainder to the first buckets.

    Sentences already chosen from an earlier bucket are skipped; short buckets
    are backfilled from the remaining pool uniformly at random.
    """
    if k < 1:
        raise ContractViolation("k must be >= 1")
    rng = random.Random(seed)
    quotas = {src: k // 4 for src in SOURCE_PRIORITY}
    for src in SOURCE_PRIORITY[: k % 4]:
        quotas[src] += 1
    chosen: dict[tuple[str, int], Candidate] = {}
    for src in SOURCE_PRIORITY:
        bucket = [c for c in pool_by_source.get(src, []) if c.key() not in chosen]
        take = min(quotas[src], len(bucket))
        for cand in rng.sample(bucket, take):
            chosen[cand.key()] = cand
    remainder = [
        c for src in SOURCE_PRIORITY for c in pool_by_source.get(src, [])
        if c.key() not in chosen
    ]
    # drop same-sentence duplicates across buckets before backfilling
    seen = set(chosen)
    remainder = [c for c in remainder if c.key() not in seen and not seen.add(c.key())]
    backfill = min(k - len(chosen), len(remainder))
    if backfill > 0:
        for cand in rng.sample(remainder, backfill):
            chosen[cand.key()] = cand
    return list(chosen.values())


def assemble_context(
    query: Sentence, selected: list[Candidate], doc: Document
) -> AssembledContext:
    """Query plus selected sentences in document order."""
    keys = [c.key() for c in selected]
    if len(set(keys)) != len(keys):
        raise ContractViolation("duplicate sentence in selected candidates")
    if (query.doc_id, query.index) in keys:
        raise ContractViolation("query sentence selected as its own context")
    sentences = sorted(
        [doc.sentences[c.index] for c in selected] + [query],
        key=lambda s: s.index,
    )
    return AssembledContext(tuple(sentences), sentences.index(query))
