"""Fine-tune a transformer cross-encoder with a sigmoid regression head.

The model reads a (query, context) pair jointly and emits one relevance
score; training minimizes binary cross-entropy against the 0/1 labels.
The default encoder is a small from-scratch transformer sized for CPU
work; pass a local checkpoint path via `encoder` to fine-tune a
pretrained model instead.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from transformers import (
    AutoModelForSequenceClassification,
    AutoTokenizer,
    BertConfig,
    BertForSequenceClassification,
)

from .data import DatasetError, Pair, read_pairs, split_pairs
from .vocab import build_vocab, make_tokenizer, write_vocab

# from-scratch encoder dimensions, small enough for CPU training
TINY = dict(hidden_size=128, num_hidden_layers=2, num_attention_heads=4,
            intermediate_size=256)


@dataclass
class TrainConfig:
    dataset: str
    out_dir: str = "scorer_model"
    epochs: int = 3
    learning_rate: float = 2e-5
    encoder: str = "tiny"
    max_seq_len: int = 256
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")
        if self.max_seq_len < 8 or self.batch_size < 1:
            raise ValueError("bad max_seq_len or batch_size")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class TrainResult:
    model_dir: str
    epoch_losses: list[float]
    eval_metrics: dict = field(default_factory=dict)


def _encode(tokenizer, pairs: list[Pair], max_len: int):
    enc = tokenizer(
        [p.query for p in pairs],
        [p.context for p in pairs],
        truncation="only_second",  # truncate from the context side
        max_length=max_len,
        padding="max_length",
        return_tensors="pt",
    )
    labels = torch.tensor([float(p.label) for p in pairs])
    return enc, labels


def _f1_at_half(probs: np.ndarray, labels: np.ndarray) -> dict:
    pred = probs > 0.5
    gold = labels > 0.5
    n_match = int(np.sum(pred & gold))
    n_pred = int(np.sum(pred))
    n_gold = int(np.sum(gold))
    p = n_match / n_pred if n_pred else 0.0
    r = n_match / n_gold if n_gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return {"precision": p, "recall": r, "f1": f1,
            "n_eval": int(len(labels)), "threshold": 0.5}


def _build_model(config: TrainConfig, vocab_size: int):
    if config.encoder == "tiny":
        bert_config = BertConfig(
            vocab_size=vocab_size,
            max_position_embeddings=config.max_seq_len,
            num_labels=1,
            **TINY,
        )
        return BertForSequenceClassification(bert_config)
    return AutoModelForSequenceClassification.from_pretrained(
        config.encoder, num_labels=1
    )


def train(config: TrainConfig) -> TrainResult:
    torch.manual_seed(config.seed)
    random.seed(config.seed)

    pairs = read_pairs(config.dataset)
    train_pairs, eval_pairs = split_pairs(pairs)

    if config.encoder == "tiny":
        vocab = build_vocab(
            [p.query for p in pairs] + [p.context for p in pairs]
        )
        tokenizer = make_tokenizer(vocab)
    else:
        vocab = None
        tokenizer = AutoTokenizer.from_pretrained(config.encoder)
    model = _build_model(config, len(vocab) if vocab else 0)
    model.train()

    enc, labels = _encode(tokenizer, train_pairs, config.max_seq_len)
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    loss_fn = torch.nn.BCEWithLogitsLoss()

    order_rng = random.Random(config.seed)
    epoch_losses = []
    n = len(train_pairs)
    for _ in range(config.epochs):
        order = list(range(n))
        order_rng.shuffle(order)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = torch.tensor(order[start : start + config.batch_size])
            logits = model(
                input_ids=enc["input_ids"][idx],
                attention_mask=enc["attention_mask"][idx],
                token_type_ids=enc["token_type_ids"][idx],
            ).logits.squeeze(-1)
            loss = loss_fn(logits, labels[idx])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += loss.item() * len(idx)
        epoch_losses.append(total / n)

    model.eval()
    eval_enc, eval_labels = _encode(tokenizer, eval_pairs, config.max_seq_len)
    probs = []
    with torch.no_grad():
        for start in range(0, len(eval_pairs), config.batch_size):
            sl = slice(start, start + config.batch_size)
            logits = model(
                input_ids=eval_enc["input_ids"][sl],
                attention_mask=eval_enc["attention_mask"][sl],
                token_type_ids=eval_enc["token_type_ids"][sl],
            ).logits.squeeze(-1)
            probs.extend(torch.sigmoid(logits).tolist())
    metrics = _f1_at_half(np.array(probs), eval_labels.numpy())

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out)
    if vocab is not None:
        write_vocab(vocab, out / "vocab.txt")
    else:
        tokenizer.save_pretrained(out)
    metadata = {
        "config": asdict(config),
        "config_hash": config.digest(),
        "epoch_losses": epoch_losses,
        "eval_metrics": metrics,
    }
    (out / "metadata.json").write_text(
        json.dumps(metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return TrainResult(str(out), epoch_losses, metrics)
