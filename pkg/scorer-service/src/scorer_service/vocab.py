"""Offline word-level tokenizer built from the training corpus.

No pretrained vocabulary is downloaded: the vocabulary is the set of
lowercased word types in the dataset plus the usual special tokens.
Pairs are encoded as [CLS] query [SEP] context [SEP] with segment ids,
the standard pair-separator convention.
"""

from __future__ import annotations

from pathlib import Path

from tokenizers import Tokenizer
from tokenizers.models import WordPiece
from tokenizers.normalizers import Lowercase
from tokenizers.pre_tokenizers import Whitespace
from tokenizers.processors import TemplateProcessing
from transformers import PreTrainedTokenizerFast

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"]
PAD_ID, UNK_ID, CLS_ID, SEP_ID = range(4)

_PRETOK = Whitespace()


def build_vocab(texts: list[str]) -> list[str]:
    words = set()
    for text in texts:
        for word, _ in _PRETOK.pre_tokenize_str(text.lower()):
            words.add(word)
    return SPECIALS + sorted(words)


def write_vocab(vocab: list[str], path: str | Path) -> None:
    Path(path).write_text("\n".join(vocab) + "\n", encoding="utf-8")


def read_vocab(path: str | Path) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def make_tokenizer(vocab: list[str]) -> PreTrainedTokenizerFast:
    table = {word: i for i, word in enumerate(vocab)}
    core = Tokenizer(WordPiece(table, unk_token="[UNK]"))
    core.normalizer = Lowercase()
    core.pre_tokenizer = _PRETOK
    core.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B:1 [SEP]:1",
        special_tokens=[("[CLS]", CLS_ID), ("[SEP]", SEP_ID)],
    )
    return PreTrainedTokenizerFast(
        tokenizer_object=core,
        pad_token="[PAD]",
        unk_token="[UNK]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        model_input_names=["input_ids", "token_type_ids", "attention_mask"],
    )
