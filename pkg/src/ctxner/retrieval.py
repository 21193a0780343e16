"""Unsupervised candidate-context generation.

Four heuristics propose context sentences for a query sentence: BM25
similarity, shared-noun sampling, and the sentences immediately before and
after. Their union (n from each, deduplicated) is the candidate pool handed
to a re-ranker.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from .corpus import Document, Sentence
from .errors import ContractViolation

DEFAULT_K1 = 1.5
DEFAULT_B = 0.75

SOURCE_PRIORITY = ("bm25", "samenoun", "before", "after")


class ContextWindow(Enum):
    FIRST_CHAPTER = "first_chapter"
    FULL_BOOK = "full_book"


def window_indices(doc: Document, window: ContextWindow) -> range:
    if window is ContextWindow.FIRST_CHAPTER:
        return range(doc.first_chapter_end)
    return range(len(doc.sentences))


@dataclass(frozen=True)
class Candidate:
    doc_id: str
    index: int
    source: str
    heuristic_score: float

    def key(self) -> tuple[str, int]:
        return (self.doc_id, self.index)


def _terms(sentence: Sentence) -> list[str]:
    return [t.text.lower() for t in sentence.tokens]


# ---------------------------------------------------------------------------
# BM25

@dataclass
class Bm25Index:
    doc_id: str
    indices: list[int]
    term_freqs: list[Counter]
    lengths: list[int]
    doc_freqs: Counter
    avg_len: float
    k1: float
    b: float

    def idf(self, term: str) -> float:
        # non-negative floor variant: ln(1 + (N - df + 0.5) / (df + 0.5))
        df = self.doc_freqs.get(term, 0)
        n = len(self.indices)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def score(self, query_terms: list[str], pos: int) -> float:
        tf = self.term_freqs[pos]
        norm = self.k1 * (1.0 - self.b + self.b * self.lengths[pos] / self.avg_len)
        score = 0.0
        for term in query_terms:
            f = tf.get(term, 0)
            if f:
                score += self.idf(term) * f * (self.k1 + 1.0) / (f + norm)
        return score


def build_bm25_index(
    doc: Document,
    window: ContextWindow,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> Bm25Index:
    if k1 < 0 or not 0.0 <= b <= 1.0:
        raise ContractViolation(f"bad BM25 parameters k1={k1}, b={b}")
    indices = list(window_indices(doc, window))
    if not indices:
        raise ContractViolation(f"{doc.doc_id}: empty context window")
    term_freqs = [Counter(_terms(doc.sentences[i])) for i in indices]
    lengths = [len(doc.sentences[i].tokens) for i in indices]
    doc_freqs = Counter()
    for tf in term_freqs:
        doc_freqs.update(tf.keys())
    avg_len = sum(lengths) / len(lengths)
    return Bm25Index(doc.doc_id, indices, term_freqs, lengths, doc_freqs, avg_len, k1, b)


def bm25_topn(index: Bm25Index, query: Sentence, n: int) -> list[Candidate]:
    """Top-n window sentences by BM25 score; zero-score and self excluded."""
    if n < 1:
        raise ContractViolation("n must be >= 1")
    query_terms = _terms(query)
    scored = []
    for pos, idx in enumerate(index.indices):
        if query.doc_id == index.doc_id and idx == query.index:
            continue
        s = index.score(query_terms, pos)
        if s > 0.0:
            scored.append((-s, idx))
    scored.sort()
    return [
        Candidate(index.doc_id, idx, "bm25", -neg) for neg, idx in scored[:n]
    ]


# ---------------------------------------------------------------------------
# noun heuristic

NOUN_SUFFIXES = ("tion", "ment", "ness", "ity", "er", "or")

# closed-class words never treated as nouns
STOPWORDS = {
    "the", "a", "an", "and", "or", "but", "nor", "so", "yet", "for", "of",
    "in", "on", "at", "to", "from", "by", "with", "about", "against",
    "between", "into", "through", "during", "before", "after", "above",
    "below", "under", "over", "again", "further", "then", "once", "here",
    "there", "when", "where", "why", "how", "all", "any", "both", "each",
    "few", "more", "most", "other", "some", "such", "no", "not", "only",
    "own", "same", "than", "too", "very", "i", "me", "my", "mine", "we",
    "us", "our", "ours", "you", "your", "yours", "he", "him", "his", "she",
    "her", "hers", "it", "its", "they", "them", "their", "theirs", "this",
    "that", "these", "those", "who", "whom", "which", "what", "whose",
    "is", "am", "are", "was", "were", "be", "been", "being", "have", "has",
    "had", "do", "does", "did", "will", "would", "shall", "should", "can",
    "could", "may", "might", "must", "never", "ever", "either", "neither",
    "as", "if", "while", "because", "until", "upon", "toward", "towards",
    "whether", "rather", "per", "via",
}


def _is_capitalized(word: str) -> bool:
    return word[0].isupper() and word[1:].islower() if len(word) > 1 else word.isupper()


class NounTagger:
    """Pluggable noun identification; callable sentence -> set of nouns."""

    def noun_set(self, sentence: Sentence) -> set[str]:
        raise NotImplementedError


class HeuristicNounTagger(NounTagger):
    """Dependency-free noun heuristic.

    Nouns are capitalized mid-sentence words, sentence-initial capitalized
    words corroborated by a capitalized mid-sentence occurrence elsewhere in
    the document, and lowercase words with noun-like suffixes. Output is
    lowercased.
    """

    def __init__(self, doc: Document):
        self.midcap_vocab = set()
        for sent in doc.sentences:
            for tok in sent.tokens[1:]:
                if tok.text.isalpha() and _is_capitalized(tok.text):
                    self.midcap_vocab.add(tok.text)

    def noun_set(self, sentence: Sentence) -> set[str]:
        nouns = set()
        for pos, tok in enumerate(sentence.tokens):
            word = tok.text
            if not word.isalpha() or word.lower() in STOPWORDS:
                continue
            if _is_capitalized(word):
                if pos > 0 or word in self.midcap_vocab:
                    nouns.add(word.lower())
            elif word.islower() and len(word) >= 4 and word.endswith(NOUN_SUFFIXES):
                nouns.add(word)
        return nouns


def noun_set(sentence: Sentence, tagger: NounTagger) -> set[str]:
    return tagger.noun_set(sentence)


def _derive_rng(seed: int, doc_id: str, query_index: int) -> random.Random:
    # stable across processes and call order
    digest = hashlib.sha256(f"{seed}|{doc_id}|{query_index}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def samenoun_matches(
    doc: Document,
    window: ContextWindow,
    query: Sentence,
    tagger: NounTagger | None = None,
) -> list[int]:
    """Window sentences sharing at least one noun with the query."""
    tagger = tagger or HeuristicNounTagger(doc)
    query_nouns = tagger.noun_set(query)
    if not query_nouns:
        return []
    out = []
    for idx in window_indices(doc, window):
        if idx == query.index:
            continue
        if query_nouns & tagger.noun_set(doc.sentences[idx]):
            out.append(idx)
    return out


def samenoun_topn(
    doc: Document,
    window: ContextWindow,
    query: Sentence,
    n: int,
    rng_seed: int,
    tagger: NounTagger | None = None,
) -> list[Candidate]:
    if n < 1:
        raise ContractViolation("n must be >= 1")
    matches = samenoun_matches(doc, window, query, tagger)
    rng = _derive_rng(rng_seed, doc.doc_id, query.index)
    chosen = matches if len(matches) <= n else rng.sample(matches, n)
    return [
        Candidate(doc.doc_id, idx, "samenoun", 1.0 / (rank + 1))
        for rank, idx in enumerate(chosen)
    ]


def surrounding(
    doc: Document,
    window: ContextWindow,
    query: Sentence,
    n_each_side: int,
) -> tuple[list[Candidate], list[Candidate]]:
    """n sentences immediately before/after the query, clipped to the window."""
    if n_each_side < 1:
        raise ContractViolation("n_each_side must be >= 1")
    win = window_indices(doc, window)
    lo, hi = win.start, win.stop
    before = [
        Candidate(doc.doc_id, i, "before", 1.0 / (query.index - i))
        for i in range(max(lo, query.index - n_each_side), min(hi, query.index))
    ]
    after = [
        Candidate(doc.doc_id, i, "after", 1.0 / (i - query.index))
        for i in range(max(lo, query.index + 1),
                       min(hi, query.index + n_each_side + 1))
    ]
    return before, after


def candidate_buckets(
    doc: Document,
    window: ContextWindow,
    query: Sentence,
    n: int,
    rng_seed: int,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    bm25_index: Bm25Index | None = None,
    tagger: NounTagger | None = None,
) -> dict[str, list[Candidate]]:
    """Per-heuristic candidate lists, before pooling/dedup."""
    index = bm25_index or build_bm25_index(doc, window, k1, b)
    before, after = surrounding(doc, window, query, n)
    return {
        "bm25": bm25_topn(index, query, n),
        "samenoun": samenoun_topn(doc, window, query, n, rng_seed, tagger),
        "before": before,
        "after": after,
    }


def pool_candidates(
    doc: Document,
    window: ContextWindow,
    query: Sentence,
    n: int,
    rng_seed: int,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    bm25_index: Bm25Index | None = None,
    tagger: NounTagger | None = None,
) -> list[Candidate]:
    """Deduplicated union of the four heuristics' top-n candidates.

    On duplicates the first-encountered source wins, in priority order
    bm25 > samenoun > before > after. Sorted by sentence index.
    """
    buckets = candidate_buckets(
        doc, window, query, n, rng_seed, k1, b, bm25_index, tagger
    )
    pooled: dict[tuple[str, int], Candidate] = {}
    for source in SOURCE_PRIORITY:
        for cand in buckets[source]:
            pooled.setdefault(cand.key(), cand)
    return sorted(pooled.values(), key=lambda c: c.index)


def dump_pool_records(query: Sentence, pool: list[Candidate]) -> list[str]:
    """Line-delimited JSON audit records for a pooled candidate set."""
    return [
        json.dumps(
            {
                "doc_id": c.doc_id,
                "query_index": query.index,
                "candidate_index": c.index,
                "source": c.source,
                "heuristic_score": c.heuristic_score,
            },
            sort_keys=True,
        )
        for c in pool
    ]
