"""Bridge between assembled contexts and an NER predictor.

The context sentences are flattened around the query, the predictor tags the
whole token sequence, and only the tags over the query span are kept. A
deterministic gazetteer predictor is provided for tests and desk-scale runs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import httpx

from .corpus import TAG_RE
from .errors import ContractViolation, ProtocolError, TransportError
from .rerank import AssembledContext


@dataclass(frozen=True)
class NerRequest:
    tokens: tuple[str, ...]
    query_span: tuple[int, int]  # [start, end)

    def __post_init__(self):
        if not self.tokens:
            raise ContractViolation("empty token sequence")
        start, end = self.query_span
        if not (0 <= start < end <= len(self.tokens)):
            raise ContractViolation(f"query span {self.query_span} out of bounds")


def build_request(context: AssembledContext) -> NerRequest:
    tokens = []
    start = end = 0
    for pos, sent in enumerate(context.sentences):
        if pos == context.query_position:
            start = len(tokens)
            end = start + len(sent.tokens)
        tokens.extend(t.text for t in sent.tokens)
    return NerRequest(tuple(tokens), (start, end))


def predict_query_tags(predictor, context: AssembledContext) -> list[str]:
    """Tag the flattened context and slice back to the query sentence."""
    request = build_request(context)
    tags = predictor.tag(list(request.tokens), request.query_span)
    if len(tags) != len(request.tokens):
        raise ProtocolError(
            f"predictor returned {len(tags)} tags for {len(request.tokens)} tokens"
        )
    for tag in tags:
        if not TAG_RE.match(tag):
            raise ProtocolError(f"predictor returned malformed tag {tag!r}")
    start, end = request.query_span
    return list(tags[start:end])


class RemoteNerPredictor:
    """Client for the NER protocol: POST /v1/tag {tokens, query_span} -> {tags}."""

    def __init__(self, endpoint: str, timeout: float = 60.0, retries: int = 3,
                 backoff: float = 0.5, pool_connections: int = 4):
        self.endpoint = endpoint.rstrip("/")
        self.retries = retries
        self.backoff = backoff
        limits = httpx.Limits(max_connections=pool_connections)
        self._client = httpx.Client(timeout=timeout, limits=limits)

    def tag(self, tokens: list[str], query_span: tuple[int, int]) -> list[str]:
        payload = {"tokens": tokens, "query_span": list(query_span)}
        last = None
        for attempt in range(self.retries):
            try:
                resp = self._client.post(f"{self.endpoint}/v1/tag", json=payload)
                resp.raise_for_status()
                return resp.json()["tags"]
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last = exc
                time.sleep(self.backoff * 2**attempt)
        raise TransportError(f"NER endpoint {self.endpoint} failed: {last}")


class MockGazetteerPredictor:
    """Deterministic NER stand-in driven by a surface -> class gazetteer.

    With ``context_rule`` on, an unknown capitalized query token is tagged
    B-PER when the same token appears in a context sentence next to a
    gazetteer PER hit, so retrieval quality shows up in mock NER scores.
    """

    def __init__(self, gazetteer: dict[str, str], context_rule: bool = False):
        if not gazetteer:
            raise ContractViolation("gazetteer must be non-empty")
        self.entries = {tuple(surface.split()): cls
                        for surface, cls in gazetteer.items()}
        self.max_len = max(len(k) for k in self.entries)
        self.context_rule = context_rule

    def _gazetteer_tags(self, tokens: list[str]) -> list[str]:
        tags = ["O"] * len(tokens)
        i = 0
        while i < len(tokens):
            matched = 0
            cls = None
            for length in range(min(self.max_len, len(tokens) - i), 0, -1):
                cand = tuple(tokens[i : i + length])
                if cand in self.entries:
                    matched, cls = length, self.entries[cand]
                    break
            if matched:
                tags[i] = f"B-{cls}"
                for j in range(i + 1, i + matched):
                    tags[j] = f"I-{cls}"
                i += matched
            else:
                i += 1
        return tags

    def tag(self, tokens: list[str], query_span: tuple[int, int]) -> list[str]:
        tags = self._gazetteer_tags(tokens)
        if not self.context_rule:
            return tags
        start, end = query_span
        for i in range(start, end):
            tok = tokens[i]
            if tags[i] != "O" or not tok[0].isupper() or not tok.isalpha():
                continue
            for j, other in enumerate(tokens):
                if start <= j < end or other != tok:
                    continue
                left_per = j > 0 and tags[j - 1].endswith("-PER")
                right_per = j + 1 < len(tokens) and tags[j + 1].endswith("-PER")
                if left_per or right_per:
                    tags[i] = "B-PER"
                    break
        return tags


def load_gazetteer(path) -> dict[str, str]:
    """Read a ``surface\tclass`` per line gazetteer file."""
    out = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[1] not in ("PER", "LOC", "ORG"):
                raise ContractViolation(f"{path}:{lineno}: bad gazetteer line")
            out[parts[0]] = parts[1]
    return out
