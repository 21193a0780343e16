#!/usr/bin/env python3
"""Write a small self-contained demo corpus, gazetteer, and config.

Creates five annotated books under the given directory, each with a
six-sentence annotated opening chapter and a body of unannotated text,
plus a PER/LOC gazetteer and a ready-to-run ctxner config.

Usage: python3 scripts/make_demo_corpus.py [--out demo]
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

SURNAMES = ["Aldan", "Berin", "Corin", "Darel", "Eron"]
FIRST_NAMES = [("Falk", "Gorm"), ("Hale", "Ivor"), ("Jarn", "Kelm"),
               ("Lorn", "Mirt"), ("Nyle", "Osric")]
PLACES = ["Ravenholm", "Stormkeep", "Duskmoor", "Frosthaven", "Emberfall"]


def _tag_for(token: str, surname: str, first_a: str, first_b: str,
             place: str) -> str:
    if token in (surname, first_a, first_b):
        return "B-PER"
    if token == place:
        return "B-LOC"
    return "O"


def book_sentences(i: int):
    surname = SURNAMES[i]
    first_a, first_b = FIRST_NAMES[i]
    place = PLACES[i]
    chapter = [
        f"{surname} rode out from {place} before first light .",
        f"{first_a} kept watch while the others slept .",
        f"The road to {place} was longer than any map allowed .",
        f"{first_b} said nothing of the letters from {surname} .",
        f"By the third day {first_a} no longer trusted the guide .",
        f"Only {place} still held against the cold .",
    ]
    body = [
        f"{first_a} {surname} led the column through the pass .",
        f"{first_b} {surname} read the old charts by candlelight .",
        "The horses were restless in the thin air .",
        f"Traders spoke well of {place} and poorly of its tolls .",
        "The rations ran low before the week was out .",
        f"A courier from {place} brought word of the thaw .",
        "Smoke rose from the valley at dusk .",
        "The company made camp beneath the ridge .",
        f"{first_a} {surname} argued for the northern route .",
        "Frost silvered the tents each morning .",
        "No one sang after the second week .",
        f"The walls of {place} appeared at last through the mist .",
        "The gates opened at the third horn .",
        "Their arrival went unremarked in the annals .",
        "Winter closed the road behind them .",
    ]
    return chapter, body, (surname, first_a, first_b, place)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="demo")
    args = parser.parse_args()
    out = Path(args.out)
    corpus = out / "corpus"
    corpus.mkdir(parents=True, exist_ok=True)

    books = []
    for i in range(5):
        doc_id = f"book{i}"
        chapter, body, (surname, fa, fb, place) = book_sentences(i)
        conll_blocks = []
        for sent in chapter:
            lines = [
                f"{tok}\t{_tag_for(tok, surname, fa, fb, place)}"
                for tok in sent.split()
            ]
            conll_blocks.append("\n".join(lines))
        (corpus / f"{doc_id}.conll").write_text(
            "\n\n".join(conll_blocks) + "\n", encoding="utf-8"
        )
        (corpus / f"{doc_id}.txt").write_text(
            "\n\n".join(chapter + body) + "\n", encoding="utf-8"
        )
        books.append(
            {"doc_id": doc_id, "title": f"Book {i}",
             "annotated": f"{doc_id}.conll", "fulltext": f"{doc_id}.txt"}
        )
    (corpus / "manifest.json").write_text(
        json.dumps({"books": books}, indent=2) + "\n", encoding="utf-8"
    )

    gazetteer = out / "gazetteer.tsv"
    rows = [f"{s}\tPER" for s in SURNAMES] + [f"{p}\tLOC" for p in PLACES]
    gazetteer.write_text("\n".join(rows) + "\n", encoding="utf-8")

    config = out / "config.toml"
    config.write_text(
        "\n".join(
            [
                "[corpus]",
                f'dir = "{corpus}"',
                "",
                "[ner]",
                f'gazetteer = "{gazetteer}"',
                "context_rule = true",
                "",
                "[experiment]",
                'method = "bm25"',
                "n = 8",
                "k = 3",
                "folds = 5",
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    print(config)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
