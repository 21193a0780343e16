"""Command line: `scorer-service train --config ...` and `serve --model ...`."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .data import DatasetError
from .train import TrainConfig, train


def _train_config(args) -> TrainConfig:
    fields = {}
    if args.config:
        with open(args.config, "rb") as f:
            fields.update(tomllib.load(f).get("train", {}))
    for name in ("dataset", "out_dir", "epochs", "learning_rate", "encoder",
                 "max_seq_len", "batch_size", "seed"):
        value = getattr(args, name, None)
        if value is not None:
            fields[name] = value
    if "dataset" not in fields:
        raise DatasetError("no dataset given (use --dataset or train.dataset)")
    return TrainConfig(**fields)


def cmd_train(args) -> int:
    result = train(_train_config(args))
    losses = " ".join(f"{x:.4f}" for x in result.epoch_losses)
    print(f"epoch losses: {losses}", file=sys.stderr)
    m = result.eval_metrics
    print(
        f"eval: P={m['precision']:.4f} R={m['recall']:.4f} F1={m['f1']:.4f}",
        file=sys.stderr,
    )
    print(result.model_dir)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .serve import create_app

    if not Path(args.model).exists():
        raise DatasetError(f"model directory not found: {args.model}")
    uvicorn.run(create_app(args.model), host=args.host, port=args.port,
                log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scorer-service")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fine-tune the cross-encoder")
    p.add_argument("--config", help="TOML file with a [train] section")
    p.add_argument("--dataset")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--encoder")
    p.add_argument("--max-seq-len", dest="max_seq_len", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("serve", help="serve a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
