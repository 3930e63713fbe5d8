"""Command-line entry point: train a spiking CNN and export the model file."""

from __future__ import annotations

import argparse
import json
import math
import sys

from .train import TrainConfig, export, train


def parse_tau(text: str) -> float:
    if text.lower() in ("inf", "if"):
        return math.inf
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("tau must be an integer >= 2 or 'inf'")
    return float(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdsnn-train",
        description="Train the spiking CNN and write an fdsnn-model/1 JSON file.",
    )
    parser.add_argument("--data", required=True, help="directory with IDX train/test splits")
    parser.add_argument("--out", required=True, help="output path for the model JSON")
    parser.add_argument("--tau", type=parse_tau, default=math.inf,
                        help="membrane time constant; 'inf' selects integrate-and-fire")
    parser.add_argument("--T", type=int, default=2, help="simulation time steps")
    parser.add_argument("--L", type=int, default=1, help="input quantization levels")
    parser.add_argument("--v-th", type=float, default=1.0, help="firing threshold")
    parser.add_argument("--surrogate", choices=["f1", "f2", "f3", "f4"], default="f3")
    parser.add_argument("--a", type=float, default=1.0, help="surrogate width parameter")
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--train-limit", type=int, default=None)
    parser.add_argument("--test-limit", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = TrainConfig(
        tau=args.tau, T=args.T, L=args.L, v_th=args.v_th,
        surrogate=args.surrogate, a=args.a, epochs=args.epochs,
        batch_size=args.batch_size, lr=args.lr, seed=args.seed,
        train_limit=args.train_limit, test_limit=args.test_limit,
    )
    try:
        net, report = train(config, args.data)
    except (RuntimeError, OSError, ValueError) as exc:
        json.dump({"error": "training-failed", "detail": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    export(net, args.out)
    json.dump({
        "model": args.out,
        "train_accuracy": report.train_accuracy,
        "test_accuracy": report.test_accuracy,
        "epochs": report.epochs_run,
        "final_loss": report.losses[-1],
    }, sys.stdout)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
