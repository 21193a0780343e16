"""Serve a trained scorer over the scoring protocol.

GET  /v1/health          -> {"status": "ok"}
POST /v1/score           -> {"scores": [...]} for
     {"pairs": [{"query": ..., "context": ...}, ...]}

Malformed requests get 400 with {"error": ...}; internal failures 500 with
{"error": ...}. Scores are clamped to [0, 1] before the wire and inference
is serialized, so identical pairs always score identically.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

import torch
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from transformers import AutoModelForSequenceClassification, AutoTokenizer

from .vocab import make_tokenizer, read_vocab

INFERENCE_BATCH = 64


class ScorerModel:
    """A loaded checkpoint with batched, serialized, clamped inference."""

    def __init__(self, model_dir: str | Path):
        model_dir = Path(model_dir)
        self.model = AutoModelForSequenceClassification.from_pretrained(model_dir)
        self.model.eval()
        vocab_file = model_dir / "vocab.txt"
        if vocab_file.exists():
            self.tokenizer = make_tokenizer(read_vocab(vocab_file))
        else:
            self.tokenizer = AutoTokenizer.from_pretrained(model_dir)
        self.max_seq_len = int(self.model.config.max_position_embeddings)
        self.metadata = {}
        meta_file = model_dir / "metadata.json"
        if meta_file.exists():
            self.metadata = json.loads(meta_file.read_text(encoding="utf-8"))
        self._lock = threading.Lock()

    def score(self, pairs: list[tuple[str, str]]) -> list[float]:
        out: list[float] = []
        with self._lock, torch.no_grad():
            for start in range(0, len(pairs), INFERENCE_BATCH):
                batch = pairs[start : start + INFERENCE_BATCH]
                enc = self.tokenizer(
                    [q for q, _ in batch],
                    [c for _, c in batch],
                    truncation="only_second",
                    max_length=self.max_seq_len,
                    padding=True,
                    return_tensors="pt",
                )
                logits = self.model(**enc).logits.squeeze(-1)
                probs = torch.sigmoid(logits).tolist()
                out.extend(min(1.0, max(0.0, p)) for p in probs)
        return out


def _parse_pairs(payload) -> list[tuple[str, str]] | str:
    """The pair list, or an error message for a malformed request."""
    if not isinstance(payload, dict) or "pairs" not in payload:
        return "request body must be an object with a 'pairs' field"
    pairs = payload["pairs"]
    if not isinstance(pairs, list) or not pairs:
        return "'pairs' must be a non-empty list"
    parsed = []
    for i, item in enumerate(pairs):
        if (
            not isinstance(item, dict)
            or not isinstance(item.get("query"), str)
            or not isinstance(item.get("context"), str)
        ):
            return f"pairs[{i}] must have string 'query' and 'context'"
        parsed.append((item["query"], item["context"]))
    return parsed


def create_app(model_dir: str | Path) -> FastAPI:
    model = ScorerModel(model_dir)
    app = FastAPI(title="scorer-service")
    app.state.model = model

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.post("/v1/score")
    async def score(request: Request):
        try:
            payload = await request.json()
        except Exception:
            return JSONResponse({"error": "request body is not valid JSON"}, 400)
        pairs = _parse_pairs(payload)
        if isinstance(pairs, str):
            return JSONResponse({"error": pairs}, 400)
        try:
            scores = model.score(pairs)
        except Exception as exc:  # pragma: no cover - defensive
            return JSONResponse({"error": f"inference failed: {exc}"}, 500)
        return {"scores": scores}

    return app
