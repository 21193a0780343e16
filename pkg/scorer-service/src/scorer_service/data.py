"""Dataset loading for the scorer.

Reads line-delimited JSON in the retrieval-dataset format: each record has
query_text, context_text, label (0/1) and split ("train" or "eval").
Extra fields (provenance, entity_surface, ...) are ignored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Pair:
    query: str
    context: str
    label: int
    split: str


def read_pairs(path: str | Path) -> list[Pair]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                pair = Pair(
                    query=rec["query_text"],
                    context=rec["context_text"],
                    label=int(rec["label"]),
                    split=rec.get("split") or "train",
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad dataset line: {exc}")
            if pair.label not in (0, 1):
                raise DatasetError(f"{path}:{lineno}: label must be 0 or 1")
            pairs.append(pair)
    if not pairs:
        raise DatasetError(f"{path}: empty dataset")
    return pairs


def split_pairs(pairs: list[Pair]) -> tuple[list[Pair], list[Pair]]:
    """(train, eval) partitions; each must contain both labels."""
    train = [p for p in pairs if p.split != "eval"]
    evals = [p for p in pairs if p.split == "eval"]
    for name, part in (("train", train), ("eval", evals)):
        labels = {p.label for p in part}
        if labels != {0, 1}:
            raise DatasetError(
                f"{name} split needs both labels, found {sorted(labels)}"
            )
    return train, evals
