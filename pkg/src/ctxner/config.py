"""Declarative TOML configuration for experiments and the CLI."""

from __future__ import annotations

import os
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .retrieval import ContextWindow
from .rerank import ScorerSpec
from .evaluation import ExperimentConfig

WINDOW_NAMES = {
    "chapter": ContextWindow.FIRST_CHAPTER,
    "first_chapter": ContextWindow.FIRST_CHAPTER,
    "book": ContextWindow.FULL_BOOK,
    "full_book": ContextWindow.FULL_BOOK,
}

# environment variables override endpoints from the config file
ENV_ENDPOINTS = {
    "llm": "CTXNER_LLM_ENDPOINT",
    "scorer": "CTXNER_SCORER_ENDPOINT",
    "ner": "CTXNER_NER_ENDPOINT",
}


def load_config(path: str | Path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    with open(p, "rb") as f:
        return tomllib.load(f)


def parse_window(name: str) -> ContextWindow:
    if name not in WINDOW_NAMES:
        raise ConfigError(f"unknown window {name!r} (use 'chapter' or 'book')")
    return WINDOW_NAMES[name]


def endpoint(cfg: dict, name: str, override: str | None = None) -> str | None:
    if override:
        return override
    env = os.environ.get(ENV_ENDPOINTS[name])
    if env:
        return env
    return cfg.get("endpoints", {}).get(name)


def scorer_spec_from_config(cfg: dict, scorer_endpoint: str | None = None) -> ScorerSpec:
    section = cfg.get("scorer", {})
    kind = section.get("kind", "random")
    if kind == "remote":
        url = endpoint(cfg, "scorer", scorer_endpoint)
        if not url:
            raise ConfigError("remote scorer requires an endpoint")
        return ScorerSpec("remote", endpoint=url)
    if kind == "lexical":
        model_path = section.get("model_path")
        if not model_path:
            raise ConfigError("lexical scorer requires scorer.model_path")
        return ScorerSpec("lexical", model_path=model_path)
    return ScorerSpec(kind, seed=section.get("seed", 0))


def experiment_configs(cfg: dict, overrides: dict) -> list[ExperimentConfig]:
    """One ExperimentConfig per value of k (k may be a list for sweeps)."""
    exp = dict(cfg.get("experiment", {}))
    exp.update({k: v for k, v in overrides.items() if v is not None})
    method = exp.get("method", "no_retrieval")
    scorer = None
    if method == "neural_pool":
        scorer = scorer_spec_from_config(cfg, overrides.get("scorer_endpoint"))
    ks = exp.get("k", 3)
    if not isinstance(ks, list):
        ks = [ks]
    window = parse_window(str(exp.get("window", "book")))
    return [
        ExperimentConfig(
            method=method,
            scorer=scorer,
            n=int(exp.get("n", 8)),
            k=int(k),
            window=window,
            runs=int(exp["runs"]) if "runs" in exp else None,
            seed=int(exp.get("seed", 0)),
            fold_count=int(exp.get("folds", 5)),
            k1=float(exp.get("k1", 1.5)),
            b=float(exp.get("b", 0.75)),
        )
        for k in ks
    ]
