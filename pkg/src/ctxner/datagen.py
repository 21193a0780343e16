"""Synthetic context-retrieval dataset generation.

Positives are produced by prompting an instruction-following LLM to invent a
context sentence about an entity, filtered for entity containment. Negatives
come from cross-document sampling and from swapping positive contexts between
queries.
"""

from __future__ import annotations

import hashlib
import json
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import httpx

from .corpus import Document, ENTITY_CLASSES, extract_mentions
from .errors import ContractViolation, TransportError

PROMPT_TEMPLATES = {
    "description": (
        "'{input_sentence}' - In the preceding sentence, {entity} is a "
        "character. Invent a one-sentence description for this character, "
        "mentioning their name."
    ),
    "action": (
        "Invent a single sentence depicting the character '{entity}' "
        "performing an action, mentioning their name."
    ),
    "movement": (
        "Invent a single sentence depicting a character of your invention "
        "going to {entity}. You must mention the name of the character."
    ),
}

# prompt kinds allowed per entity class; ORG gets description only
COMPATIBLE_KINDS = {
    "PER": ("description", "action"),
    "LOC": ("description", "movement"),
    "ORG": ("description",),
}

SENTENCE_TERMINATORS = ".!?"


@dataclass(frozen=True)
class RetrievalExample:
    query_text: str
    context_text: str
    label: int
    provenance: str  # llm_positive | negative_sampling | positive_swap
    entity_surface: str | None = None
    entity_class: str | None = None
    split: str | None = None

    def __post_init__(self):
        if self.label == 1:
            if self.provenance != "llm_positive":
                raise ContractViolation("label-1 example must come from the LLM")
            if self.entity_surface is None or self.entity_surface not in self.context_text:
                raise ContractViolation(
                    f"positive context does not contain {self.entity_surface!r}"
                )
        elif self.label == 0:
            if self.provenance not in ("negative_sampling", "positive_swap"):
                raise ContractViolation(f"bad provenance {self.provenance!r} for label 0")
        else:
            raise ContractViolation(f"label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class LlmRequest:
    prompt: str
    max_tokens: int = 96
    temperature: float = 0.7
    stop: tuple[str, ...] = ("\n",)

    def __post_init__(self):
        if self.max_tokens < 16:
            raise ContractViolation("max_tokens must be >= 16")
        if not 0.0 <= self.temperature <= 2.0:
            raise ContractViolation("temperature must be in [0, 2]")


def build_prompt(kind: str, entity_class: str, entity_surface: str, input_sentence: str) -> str:
    if kind not in PROMPT_TEMPLATES:
        raise ContractViolation(f"unknown prompt kind {kind!r}")
    if kind not in COMPATIBLE_KINDS[entity_class]:
        raise ContractViolation(f"prompt kind {kind!r} incompatible with {entity_class}")
    return PROMPT_TEMPLATES[kind].format(
        input_sentence=input_sentence, entity=entity_surface
    )


# ---------------------------------------------------------------------------
# LLM clients

def _trim_generation(prompt: str, text: str) -> str:
    """Strip an echoed prompt and cut at the first sentence terminator."""
    if text.startswith(prompt):
        text = text[len(prompt):]
    text = text.strip().split("\n")[0].strip()
    for i, ch in enumerate(text):
        if ch in SENTENCE_TERMINATORS:
            return text[: i + 1]
    return text


class HttpLlmClient:
    """Thin completion-style client: POST {prompt, max_tokens, temperature, stop}."""

    def __init__(self, endpoint: str, timeout: float = 60.0, retries: int = 3,
                 backoff: float = 0.5):
        self.endpoint = endpoint
        self.retries = retries
        self.backoff = backoff
        self._client = httpx.Client(timeout=timeout)

    def generate(self, request: LlmRequest) -> str:
        payload = {
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "stop": list(request.stop),
        }
        last = None
        for attempt in range(self.retries):
            try:
                resp = self._client.post(self.endpoint, json=payload)
                resp.raise_for_status()
                return _trim_generation(request.prompt, resp.json()["text"])
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last = exc
                time.sleep(self.backoff * 2**attempt)
        raise TransportError(f"LLM endpoint {self.endpoint} failed: {last}")


class MockLlmClient:
    """Deterministic in-process stand-in for the LLM endpoint.

    Parses the entity back out of the known prompt templates and answers with
    a fixed-form sentence containing it. ``miss_rate`` makes a seeded fraction
    of outputs omit the entity, to exercise containment filtering.
    """

    def __init__(self, miss_rate: float = 0.0, seed: int = 0):
        self.miss_rate = miss_rate
        self.seed = seed

    def generate(self, request: LlmRequest) -> str:
        prompt = request.prompt
        if " is a character. Invent a one-sentence description" in prompt:
            entity = prompt.split(" - In the preceding sentence, ")[1].split(
                " is a character."
            )[0]
            text = f"{entity} is a mysterious figure spoken of in hushed tones."
        elif "performing an action" in prompt:
            entity = prompt.split("depicting the character '")[1].split("'")[0]
            text = f"{entity} strode across the courtyard at dawn."
        elif "going to " in prompt:
            entity = prompt.split("going to ")[1].split(". You must mention")[0]
            text = f"The weary traveler Aldric journeyed to {entity}."
        else:
            return "I cannot help with that."
        if self.miss_rate > 0.0:
            digest = hashlib.sha256(f"{self.seed}|{prompt}".encode()).digest()
            if int.from_bytes(digest[:8], "big") / 2**64 < self.miss_rate:
                text = "Someone unremarkable wandered by."
        return _trim_generation(prompt, text)


def llm_generate(client, request: LlmRequest) -> str:
    return client.generate(request)


# ---------------------------------------------------------------------------
# generation

@dataclass
class GenerationReport:
    accepted: int = 0
    filtered: int = 0  # output missing the entity surface
    skipped: list[str] = field(default_factory=list)  # transport failures etc.

    def to_dict(self) -> dict:
        return {"accepted": self.accepted, "filtered": self.filtered,
                "skipped": sorted(self.skipped)}


def _entity_occurrences(docs: list[Document]) -> dict[tuple[str, str], list[str]]:
    """(class, surface) -> texts of annotated sentences containing the entity."""
    occ: dict[tuple[str, str], list[str]] = {}
    for doc in docs:
        for sent in doc.annotated_sentences:
            for m in extract_mentions(sent):
                occ.setdefault((m.entity_class, m.surface), []).append(sent.text)
    return occ


def _entity_rng(seed: int, entity_class: str, surface: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}|{entity_class}|{surface}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def generate_positives(
    docs: list[Document],
    llm_client,
    seed: int,
    parallelism: int = 4,
    max_tokens: int = 96,
    temperature: float = 0.7,
) -> tuple[list[RetrievalExample], GenerationReport]:
    """One positive example per unique (class, surface), containment-filtered.

    Per-entity seeds make the output independent of completion order, so
    parallel generation stays byte-deterministic.
    """
    occurrences = _entity_occurrences(docs)
    keys = sorted(occurrences)

    def one(key: tuple[str, str]) -> tuple[str, RetrievalExample | str]:
        entity_class, surface = key
        rng = _entity_rng(seed, entity_class, surface)
        query_text = rng.choice(sorted(occurrences[key]))
        kind = rng.choice(COMPATIBLE_KINDS[entity_class])
        prompt = build_prompt(kind, entity_class, surface, query_text)
        try:
            context = llm_client.generate(
                LlmRequest(prompt, max_tokens=max_tokens, temperature=temperature)
            )
        except TransportError:
            return "skipped", f"{entity_class}:{surface}"
        if not context:
            return "skipped", f"{entity_class}:{surface}"
        if surface not in context:
            return "filtered", f"{entity_class}:{surface}"
        ex = RetrievalExample(query_text, context, 1, "llm_positive",
                              surface, entity_class)
        return "accepted", ex

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        results = list(pool.map(one, keys))
    report = GenerationReport()
    positives = []
    for status, payload in results:
        if status == "accepted":
            report.accepted += 1
            positives.append(payload)
        elif status == "filtered":
            report.filtered += 1
        else:
            report.skipped.append(payload)
    return positives, report


def negative_sampling(
    docs: list[Document], count: int, seed: int
) -> list[RetrievalExample]:
    """Pair annotated sentences with sentences drawn from other documents."""
    if len(docs) < 2:
        raise ContractViolation("negative sampling needs at least 2 documents")
    rng = random.Random(seed)
    annotated = [
        (doc.doc_id, sent.text) for doc in docs for sent in doc.annotated_sentences
    ]
    by_doc = {doc.doc_id: [s.text for s in doc.sentences] for doc in docs}
    out = []
    for _ in range(count):
        doc_id, query_text = rng.choice(annotated)
        other = rng.choice([d for d in sorted(by_doc) if d != doc_id])
        context = rng.choice(by_doc[other])
        out.append(RetrievalExample(query_text, context, 0, "negative_sampling"))
    return out


def positive_swap(
    positives: list[RetrievalExample], seed: int
) -> tuple[list[RetrievalExample], list[str]]:
    """Give each positive query the context of a different positive.

    A swapped-in context must come from an entity absent from the query, so
    the result is a guaranteed label-0 pair whose context still contains some
    entity. Returns (examples, skipped entity surfaces).
    """
    if len(positives) < 2:
        raise ContractViolation("positive swapping needs at least 2 positives")
    rng = random.Random(seed)
    out = []
    skipped = []
    for pos in positives:
        eligible = [
            other for other in positives
            if other is not pos and other.entity_surface not in pos.query_text
        ]
        if not eligible:
            skipped.append(pos.entity_surface or "?")
            continue
        donor = rng.choice(eligible)
        out.append(
            RetrievalExample(
                pos.query_text, donor.context_text, 0, "positive_swap",
                donor.entity_surface, donor.entity_class,
            )
        )
    return out, skipped


def assemble_dataset(
    positives: list[RetrievalExample],
    negatives: list[RetrievalExample],
    eval_fraction: float,
    seed: int,
) -> tuple[list[RetrievalExample], list[RetrievalExample]]:
    """Stratified train/eval split, grouped so a query never straddles splits."""
    if not 0.0 < eval_fraction < 1.0:
        raise ContractViolation("eval_fraction must be in (0, 1)")
    examples = list(positives) + list(negatives)
    groups: dict[str, list[RetrievalExample]] = {}
    for ex in examples:
        groups.setdefault(ex.query_text, []).append(ex)
    for label in (0, 1):
        n_groups = sum(1 for g in groups.values() if any(e.label == label for e in g))
        if n_groups < 2:
            raise ContractViolation(f"need at least 2 query groups with label {label}")

    order = sorted(groups)
    random.Random(seed).shuffle(order)
    total = {lbl: sum(1 for e in examples if e.label == lbl) for lbl in (0, 1)}
    target = {lbl: round(eval_fraction * total[lbl]) for lbl in (0, 1)}
    eval_count = {0: 0, 1: 0}
    train, evals = [], []
    for key in order:
        group = groups[key]
        counts = {lbl: sum(1 for e in group if e.label == lbl) for lbl in (0, 1)}
        fits = all(eval_count[lbl] + counts[lbl] <= target[lbl] + 1 for lbl in (0, 1))
        if fits and any(eval_count[lbl] < target[lbl] for lbl in (0, 1)):
            evals.extend(group)
            for lbl in (0, 1):
                eval_count[lbl] += counts[lbl]
        else:
            train.extend(group)
    train = [_with_split(e, "train") for e in sorted(train, key=_sort_key)]
    evals = [_with_split(e, "eval") for e in sorted(evals, key=_sort_key)]
    return train, evals


def _sort_key(ex: RetrievalExample):
    return (ex.query_text, ex.provenance, ex.context_text)


def _with_split(ex: RetrievalExample, split: str) -> RetrievalExample:
    return RetrievalExample(ex.query_text, ex.context_text, ex.label, ex.provenance,
                            ex.entity_surface, ex.entity_class, split)


# ---------------------------------------------------------------------------
# serialization

def write_dataset(examples: list[RetrievalExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(json.dumps(asdict(ex), sort_keys=True, ensure_ascii=False) + "\n")


def read_dataset(path: str | Path) -> list[RetrievalExample]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(RetrievalExample(**rec))
            except (json.JSONDecodeError, TypeError) as exc:
                raise ContractViolation(f"{path}:{lineno}: bad dataset line: {exc}")
    return out


def write_report(report: GenerationReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
