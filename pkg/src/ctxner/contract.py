"""Conformance checks for the scoring protocol.

Any service claiming to implement POST /v1/score and GET /v1/health can be
verified against the client's expectations: health shape, score range and
alignment, per-request determinism, and error signalling.
"""

from __future__ import annotations

import httpx

from .errors import ProtocolError
from .rerank import RemoteScorer

_SAMPLE_PAIRS = [
    ("The eldest of these was young Frodo Baggins.", "Then he disappeared inside with Bilbo."),
    ("The eldest of these was young Frodo Baggins.", "I feel I need a holiday."),
    ("Winston made for the stairs.", "The Ministry of Truth concerned itself with news."),
]


def check_scorer_protocol(base_url: str, timeout: float = 30.0) -> list[str]:
    """Run every conformance check; returns the check names on success.

    Raises ProtocolError naming the first failed check.
    """
    base = base_url.rstrip("/")
    client = httpx.Client(timeout=timeout)
    passed = []

    resp = client.get(f"{base}/v1/health")
    if resp.status_code != 200 or resp.json() != {"status": "ok"}:
        raise ProtocolError(f"health: expected {{'status': 'ok'}}, got {resp.text!r}")
    passed.append("health")

    scorer = RemoteScorer(base, timeout=timeout, retries=1)
    scores = scorer.score_pairs(_SAMPLE_PAIRS)
    if len(scores) != len(_SAMPLE_PAIRS):
        raise ProtocolError("alignment: score count does not match pair count")
    passed.append("alignment")
    if not all(0.0 <= s <= 1.0 for s in scores):
        raise ProtocolError(f"range: scores outside [0,1]: {scores}")
    passed.append("range")

    again = scorer.score_pairs(_SAMPLE_PAIRS)
    if scores != again:
        raise ProtocolError(f"determinism: {scores} != {again}")
    repeated = scorer.score_pairs([_SAMPLE_PAIRS[0], _SAMPLE_PAIRS[0]])
    if repeated[0] != repeated[1]:
        raise ProtocolError("determinism: identical pairs scored differently in one batch")
    passed.append("determinism")

    resp = client.post(f"{base}/v1/score", json={"wrong": "shape"})
    if not 400 <= resp.status_code < 600:
        raise ProtocolError(
            f"errors: malformed request answered with {resp.status_code}"
        )
    try:
        body = resp.json()
    except ValueError:
        raise ProtocolError("errors: non-JSON error body")
    if "error" not in body:
        raise ProtocolError(f"errors: error body missing 'error' field: {body}")
    passed.append("error-codes")

    return passed
