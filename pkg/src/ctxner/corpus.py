"""Corpus loading: annotated first chapters, full-book text, BIO decoding.

Annotated files are CoNLL-like: one ``token\ttag`` pair per line, blank line
between sentences. Full-book text is one plain UTF-8 file per book. A
``manifest.json`` in the corpus directory maps each book to its title and its
two files.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ContractViolation, CorpusError

ENTITY_CLASSES = ("PER", "LOC", "ORG")

TAG_RE = re.compile(r"^(O|[BI]-(PER|LOC|ORG))$")

# Common English abbreviations that a sentence-final period must not split on.
ABBREVIATIONS = {
    "Mr.", "Mrs.", "Ms.", "Dr.", "St.", "Prof.", "Jr.", "Sr.", "Capt.",
    "Col.", "Gen.", "Lt.", "Rev.", "Hon.", "Sgt.", "Esq.", "Messrs.",
    "Mme.", "Mlle.", "vs.", "etc.", "e.g.", "i.e.", "cf.", "no.", "No.",
    "vol.", "Vol.", "ch.", "Ch.", "p.", "pp.",
}

_OPENERS = "\"'“‘("


@dataclass(frozen=True)
class Token:
    text: str
    tag: str | None = None

    def __post_init__(self):
        if not self.text or "\n" in self.text:
            raise CorpusError(f"bad token text: {self.text!r}")
        if self.tag is not None and not TAG_RE.match(self.tag):
            raise CorpusError(f"bad BIO tag: {self.tag!r}")


@dataclass(frozen=True)
class Sentence:
    doc_id: str
    index: int
    tokens: tuple[Token, ...]
    annotated: bool

    def __post_init__(self):
        tagged = sum(t.tag is not None for t in self.tokens)
        if self.annotated and tagged != len(self.tokens):
            raise CorpusError(
                f"{self.doc_id}[{self.index}]: annotated sentence with missing tags"
            )
        if not self.annotated and tagged:
            raise CorpusError(
                f"{self.doc_id}[{self.index}]: unannotated sentence carries tags"
            )

    @property
    def text(self) -> str:
        return " ".join(t.text for t in self.tokens)

    @property
    def tags(self) -> list[str]:
        if not self.annotated:
            raise ContractViolation(f"{self.doc_id}[{self.index}] is not annotated")
        return [t.tag for t in self.tokens]


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    sentences: tuple[Sentence, ...]
    first_chapter_end: int

    def __post_init__(self):
        if not 0 < self.first_chapter_end <= len(self.sentences):
            raise CorpusError(f"{self.doc_id}: bad first_chapter_end")
        for i, sent in enumerate(self.sentences):
            if sent.index != i:
                raise CorpusError(f"{self.doc_id}: sentence indices not dense at {i}")
            if sent.annotated and i >= self.first_chapter_end:
                raise CorpusError(
                    f"{self.doc_id}: annotated sentence {i} outside first chapter"
                )

    @property
    def annotated_sentences(self) -> list[Sentence]:
        return [s for s in self.sentences if s.annotated]


@dataclass(frozen=True)
class Mention:
    entity_class: str
    start: int
    end: int  # exclusive
    surface: str


# ---------------------------------------------------------------------------
# sentence segmentation / tokenization

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def tokenize(chunk: str) -> list[str]:
    """Whitespace split plus punctuation splitting; keeps every non-space char."""
    return _TOKEN_RE.findall(chunk)


def _sentence_chunks(raw_text: str) -> list[str]:
    chunks = []
    start = 0
    i = 0
    n = len(raw_text)
    while i < n:
        ch = raw_text[i]
        if ch in ".!?":
            # swallow a run of terminators plus trailing closers
            j = i + 1
            while j < n and raw_text[j] in ".!?\"'”’)":
                j += 1
            k = j
            while k < n and raw_text[k].isspace():
                k += 1
            if k > j and k < n and (raw_text[k].isupper() or raw_text[k] in _OPENERS):
                word = re.search(r"(\S+)$", raw_text[start:j])
                if not (ch == "." and word and word.group(1) in ABBREVIATIONS):
                    chunks.append(raw_text[start:j])
                    start = k
            i = j
        else:
            i += 1
    if start < n:
        chunks.append(raw_text[start:])
    return chunks


def segment_sentences(raw_text: str) -> list[list[str]]:
    """Split raw text into sentences of tokens.

    Paragraph breaks (blank lines) always end a sentence; inside a paragraph,
    ``. ! ?`` followed by whitespace and an uppercase letter or opening quote
    end one, unless the final word is a known abbreviation.
    """
    sentences = []
    for para in re.split(r"\n\s*\n", raw_text):
        for chunk in _sentence_chunks(para):
            toks = tokenize(chunk)
            if toks:
                sentences.append(toks)
    return sentences


# ---------------------------------------------------------------------------
# BIO decoding

def decode_bio(tags: list[str]) -> list[tuple[int, int, str]]:
    """Lenient BIO decoding into (start, end, class) spans.

    An I- tag without a preceding same-class B/I opens a new span.
    """
    spans = []
    start = None
    cls = None
    for i, tag in enumerate(tags):
        if tag == "O":
            if start is not None:
                spans.append((start, i, cls))
                start = None
            continue
        prefix, tag_cls = tag.split("-", 1)
        if prefix == "B" or tag_cls != cls or start is None:
            if start is not None:
                spans.append((start, i, cls))
            start, cls = i, tag_cls
    if start is not None:
        spans.append((start, len(tags), cls))
    return spans


def encode_bio(spans: list[tuple[int, int, str]], length: int) -> list[str]:
    tags = ["O"] * length
    for start, end, cls in spans:
        tags[start] = f"B-{cls}"
        for i in range(start + 1, end):
            tags[i] = f"I-{cls}"
    return tags


def extract_mentions(sentence: Sentence) -> list[Mention]:
    if not sentence.annotated:
        raise ContractViolation(
            f"extract_mentions on unannotated {sentence.doc_id}[{sentence.index}]"
        )
    mentions = []
    for start, end, cls in decode_bio(sentence.tags):
        surface = " ".join(t.text for t in sentence.tokens[start:end])
        mentions.append(Mention(cls, start, end, surface))
    return mentions


def unique_entity_strings(docs: list[Document]) -> dict[str, set[str]]:
    """Case-sensitive unique entity surfaces per class over all documents."""
    out: dict[str, set[str]] = {}
    for doc in docs:
        for sent in doc.annotated_sentences:
            for m in extract_mentions(sent):
                out.setdefault(m.entity_class, set()).add(m.surface)
    return out


# ---------------------------------------------------------------------------
# loading

def parse_annotated_file(path: Path, doc_id: str) -> list[tuple[list[str], list[str]]]:
    """Parse a token\ttag file into (tokens, tags) sentence pairs."""
    sentences = []
    tokens: list[str] = []
    tags: list[str] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                if tokens:
                    sentences.append((tokens, tags))
                    tokens, tags = [], []
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise CorpusError(f"{path}:{lineno}: expected '<token>\\t<tag>'")
            text, tag = parts
            if not TAG_RE.match(tag):
                raise CorpusError(f"{path}:{lineno}: malformed tag {tag!r}")
            tokens.append(text)
            tags.append(tag)
    if tokens:
        sentences.append((tokens, tags))
    if not sentences:
        raise CorpusError(f"{path}: no sentences in annotated file for {doc_id}")
    return sentences


def serialize_annotated(doc: Document) -> str:
    """Canonical annotated-file text for a document's first chapter."""
    blocks = []
    for sent in doc.annotated_sentences:
        blocks.append("\n".join(f"{t.text}\t{t.tag}" for t in sent.tokens))
    return "\n\n".join(blocks) + "\n"


_NORM_RE = re.compile(r"[^0-9a-z]+")


def _normalize(text: str) -> str:
    return _NORM_RE.sub("", text.lower())


def _split_full_text(raw_text: str, last_chapter_sentence: str) -> str:
    """Return the part of the raw book after the annotated first chapter.

    Alignment is a normalized-text search for the chapter's final sentence;
    on failure the whole book is treated as the remainder (robust to edition
    drift between the annotated chapter and the raw text).
    """
    needle = _normalize(last_chapter_sentence)
    if not needle:
        return raw_text
    norm_chars = []
    positions = []
    for i, ch in enumerate(raw_text.lower()):
        if ch.isalnum() and ch.isascii():
            norm_chars.append(ch)
            positions.append(i)
    hay = "".join(norm_chars)
    at = hay.find(needle)
    if at < 0:
        return raw_text
    end_norm = at + len(needle) - 1
    return raw_text[positions[end_norm] + 1 :]


def build_document(
    doc_id: str,
    title: str,
    annotated: list[tuple[list[str], list[str]]],
    full_text: str,
) -> Document:
    sentences = []
    for idx, (toks, tags) in enumerate(annotated):
        tokens = tuple(Token(t, g) for t, g in zip(toks, tags))
        sentences.append(Sentence(doc_id, idx, tokens, annotated=True))
    remainder = _split_full_text(full_text, sentences[-1].text)
    idx = len(sentences)
    for toks in segment_sentences(remainder):
        tokens = tuple(Token(t) for t in toks)
        sentences.append(Sentence(doc_id, idx, tokens, annotated=False))
        idx += 1
    return Document(doc_id, title, tuple(sentences), first_chapter_end=len(annotated))


def load_ner_corpus(path: str | Path) -> list[Document]:
    """Load all books from a corpus directory.

    With a ``manifest.json`` present, it drives loading; otherwise every
    ``<doc_id>.conll`` / ``<doc_id>.txt`` pair in the directory is taken.
    """
    root = Path(path)
    if not root.is_dir():
        raise CorpusError(f"not a directory: {root}")
    manifest = root / "manifest.json"
    if manifest.exists():
        entries = json.loads(manifest.read_text(encoding="utf-8"))["books"]
    else:
        entries = [
            {"doc_id": p.stem, "title": p.stem, "annotated": p.name,
             "fulltext": f"{p.stem}.txt"}
            for p in sorted(root.glob("*.conll"))
        ]
    if not entries:
        raise CorpusError(f"no documents found in {root}")
    docs = []
    seen = set()
    for entry in entries:
        doc_id = entry["doc_id"]
        if doc_id in seen:
            raise CorpusError(f"duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
        full_path = root / entry["fulltext"]
        if not full_path.exists():
            raise CorpusError(f"missing full-text file for book {doc_id!r}: {full_path}")
        annotated = parse_annotated_file(root / entry["annotated"], doc_id)
        full_text = full_path.read_text(encoding="utf-8")
        docs.append(build_document(doc_id, entry.get("title", doc_id), annotated, full_text))
    return docs
