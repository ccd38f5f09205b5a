"""Command-line interface: train the toy estimator on a scene dataset.

Exit codes: 0 success, 1 input/usage error, 2 internal error.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

from threadtrace.errors import ThreadTraceError

from .losses import LossWeights
from .train import TrainConfig, train_toy


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def build_parser() -> _Parser:
    parser = _Parser(prog="threadnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    train = sub.add_parser("train", help="train on a dataset directory and export maps")
    train.add_argument("--data", type=Path, required=True, help="dataset from `threadtrace gen`")
    train.add_argument("--out", type=Path, required=True, help="artifact directory")
    train.add_argument("--epochs", type=int, default=4)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--lr", type=float, default=2e-3)
    train.add_argument("--holdout", type=float, default=0.2)
    train.add_argument("--base-channels", type=int, default=8)
    train.add_argument("--overlap-weights", type=float, nargs=3, default=None,
                       metavar=("BG", "NON", "OV"))
    return parser


def _cmd_train(args) -> int:
    weights = (
        LossWeights(*args.overlap_weights) if args.overlap_weights else LossWeights()
    )
    cfg = TrainConfig(
        epochs=args.epochs,
        seed=args.seed,
        lr=args.lr,
        holdout_fraction=args.holdout,
        base_channels=args.base_channels,
        weights=weights,
    )
    result = train_toy(args.data, args.out, cfg)
    print(f"export manifest: {result.export_manifest}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse -h
        return int(exc.code or 0)
    try:
        return _cmd_train(args)
    except (ThreadTraceError, ValueError, OSError) as exc:
        print(f"threadnet: error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
