import json

import pytest

from ctxner.cli import main

from stubservers import always_error, constant_scorer, stub_server


@pytest.fixture()
def config_file(tmp_path, corpus_dir, gazetteer_file):
    path = tmp_path / "config.toml"
    path.write_text(
        "\n".join(
            [
                "[corpus]",
                f'dir = "{corpus_dir}"',
                "",
                "[ner]",
                f'gazetteer = "{gazetteer_file}"',
                "context_rule = true",
                "",
                "[experiment]",
                'method = "surrounding"',
                "k = 2",
                "folds = 5",
            ]
        ),
        encoding="utf-8",
    )
    return str(path)


def test_validate_corpus(config_file, capsys):
    assert main(["validate-corpus", "--config", config_file]) == 0
    out = capsys.readouterr().out
    assert out.strip() == "5 documents, 105 sentences"


def test_validate_corpus_missing_config(tmp_path, capsys):
    rc = main(["validate-corpus", "--config", str(tmp_path / "nope.toml")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_validate_corpus_bad_dir(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text(f'[corpus]\ndir = "{tmp_path / "empty"}"\n', encoding="utf-8")
    (tmp_path / "empty").mkdir()
    assert main(["validate-corpus", "--config", str(cfg)]) == 1
    assert "no documents" in capsys.readouterr().err


def test_unknown_flag_usage_error(config_file):
    with pytest.raises(SystemExit) as exc:
        main(["validate-corpus", "--config", config_file, "--bogus"])
    assert exc.value.code == 2


def test_missing_subcommand_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


# ---------------------------------------------------------------------------
# gen-dataset

def test_gen_dataset_mock(config_file, tmp_path, capsys):
    out_dir = tmp_path / "gen"
    rc = main(
        [
            "gen-dataset",
            "--config", config_file,
            "--llm-endpoint", "mock",
            "--seed", "5",
            "--out-dir", str(out_dir),
        ]
    )
    assert rc == 0
    captured = capsys.readouterr()
    assert str(out_dir / "dataset.jsonl") in captured.out
    lines = (out_dir / "dataset.jsonl").read_text().splitlines()
    assert len(lines) > 20
    report = json.loads((out_dir / "generation_report.json").read_text())
    assert report["accepted"] > 0
    labels = {json.loads(line)["label"] for line in lines}
    assert labels == {0, 1}


def test_gen_dataset_idempotent(config_file, tmp_path):
    outs = []
    for name in ("a", "b"):
        out_dir = tmp_path / name
        main(
            [
                "gen-dataset",
                "--config", config_file,
                "--llm-endpoint", "mock",
                "--seed", "5",
                "--out-dir", str(out_dir),
            ]
        )
        outs.append((out_dir / "dataset.jsonl").read_bytes())
    assert outs[0] == outs[1]


def test_gen_dataset_requires_endpoint(config_file, capsys):
    assert main(["gen-dataset", "--config", config_file]) == 1
    assert "llm" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# train-scorer and score

@pytest.fixture()
def trained_model(config_file, tmp_path):
    out_dir = tmp_path / "gen"
    main(
        [
            "gen-dataset",
            "--config", config_file,
            "--llm-endpoint", "mock",
            "--seed", "5",
            "--out-dir", str(out_dir),
        ]
    )
    model = tmp_path / "model.json"
    rc = main(
        [
            "train-scorer",
            "--config", config_file,
            "--dataset", str(out_dir / "dataset.jsonl"),
            "--epochs", "200",
            "--out", str(model),
        ]
    )
    assert rc == 0
    return model


def test_train_scorer_writes_model(trained_model):
    blob = json.loads(trained_model.read_text())
    assert "params" in blob and len(blob["params"]) == 6


def test_score_random_reproducible(capsys):
    argv = ["score", "Croaker waited .", "Croaker is a healer .",
            "--scorer", "random", "--seed", "7"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first
    value = float(first.strip())
    assert 0.0 <= value <= 1.0


def test_score_remote_stub(capsys):
    with stub_server(constant_scorer(0.5)) as url:
        rc = main(
            ["score", "q", "c", "--scorer", "remote", "--endpoint", url]
        )
    assert rc == 0
    assert capsys.readouterr().out.strip() == "0.5000"


def test_score_lexical_model(trained_model, capsys):
    rc = main(
        [
            "score",
            "Falk Aldan led the column .",
            "Falk Aldan is a steady captain mentioned in the records .",
            "--scorer", "lexical",
            "--model", str(trained_model),
        ]
    )
    assert rc == 0
    matched = float(capsys.readouterr().out.strip())
    rc = main(
        [
            "score",
            "Falk Aldan led the column .",
            "the rain kept falling on the empty road .",
            "--scorer", "lexical",
            "--model", str(trained_model),
        ]
    )
    assert rc == 0
    unmatched = float(capsys.readouterr().out.strip())
    assert matched > unmatched


# ---------------------------------------------------------------------------
# run-eval

def test_run_eval_writes_reports(config_file, tmp_path, capsys):
    out_dir = tmp_path / "eval"
    rc = main(
        [
            "run-eval",
            "--config", config_file,
            "--k", "2",
            "--out-dir", str(out_dir),
            "--workers", "2",
        ]
    )
    assert rc == 0
    captured = capsys.readouterr()
    assert "F1=" in captured.err
    for name in ("per_book.csv", "summary.json", "curves.csv"):
        assert (out_dir / name).exists()
    blob = json.loads((out_dir / "summary.json").read_text())
    assert len(blob) == 1 and 0 <= blob[0]["f1"] <= 1


def test_run_eval_unreachable_scorer(tmp_path, corpus_dir, gazetteer_file, capsys):
    cfg = tmp_path / "remote.toml"
    cfg.write_text(
        "\n".join(
            [
                "[corpus]",
                f'dir = "{corpus_dir}"',
                "[ner]",
                f'gazetteer = "{gazetteer_file}"',
                "[experiment]",
                'method = "neural_pool"',
                "[scorer]",
                'kind = "remote"',
            ]
        ),
        encoding="utf-8",
    )
    rc = main(
        [
            "run-eval",
            "--config", str(cfg),
            "--scorer-endpoint", "http://127.0.0.1:9",
            "--out-dir", str(tmp_path / "out"),
        ]
    )
    assert rc == 1
    assert "http://127.0.0.1:9" in capsys.readouterr().err


def test_run_eval_remote_error_path(tmp_path, corpus_dir, gazetteer_file, capsys):
    cfg = tmp_path / "remote.toml"
    cfg.write_text(
        "\n".join(
            [
                "[corpus]",
                f'dir = "{corpus_dir}"',
                "[ner]",
                f'gazetteer = "{gazetteer_file}"',
                "[experiment]",
                'method = "neural_pool"',
                "runs = 1",
                "[scorer]",
                'kind = "remote"',
            ]
        ),
        encoding="utf-8",
    )
    with stub_server(constant_scorer(0.5)) as url:
        rc = main(
            [
                "run-eval",
                "--config", str(cfg),
                "--scorer-endpoint", url,
                "--k", "2",
                "--out-dir", str(tmp_path / "out"),
            ]
        )
    assert rc == 0


def test_run_eval_k_sweep_from_config(tmp_path, corpus_dir, gazetteer_file):
    cfg = tmp_path / "sweep.toml"
    cfg.write_text(
        "\n".join(
            [
                "[corpus]",
                f'dir = "{corpus_dir}"',
                "[ner]",
                f'gazetteer = "{gazetteer_file}"',
                "context_rule = true",
                "[experiment]",
                'method = "surrounding"',
                "k = [1, 2, 3]",
            ]
        ),
        encoding="utf-8",
    )
    out_dir = tmp_path / "out"
    assert main(["run-eval", "--config", str(cfg), "--out-dir", str(out_dir)]) == 0
    import csv

    with open(out_dir / "curves.csv", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert sorted(int(r["k"]) for r in rows) == [1, 2, 3]


def test_run_eval_idempotent(config_file, tmp_path):
    outs = []
    for name in ("a", "b"):
        out_dir = tmp_path / name
        main(["run-eval", "--config", config_file, "--out-dir", str(out_dir)])
        outs.append((out_dir / "summary.json").read_bytes())
    assert outs[0] == outs[1]


# ---------------------------------------------------------------------------
# dump-pool

def test_dump_pool_jsonl(config_file, capsys):
    rc = main(["dump-pool", "--config", config_file, "--n", "4"])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines
    for line in lines:
        record = json.loads(line)
        assert {
            "doc_id", "query_index", "candidate_index", "source",
            "heuristic_score",
        } <= set(record)
