"""Command-line entry point: one subcommand per pipeline stage.

Exit codes: 0 success (including evaluations that skipped unavailable
models), 1 invalid configuration or request, 2 missing/corrupt data or
artifacts, 3 training failure.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from . import pipeline
from .backbones import BackboneError
from .config import ConfigError, load_config
from .ensembles import EnsembleError
from .grids import ArchiveError
from .latent import CompressionError
from .pipeline import DataError
from .rollout import RolloutError, TrainingError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_TRAINING = 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        metavar="FILE",
        default=None,
        help="JSON configuration file (defaults apply when omitted)",
    )
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config key, e.g. --set rollout.horizon=90 "
        "(JSON values; bare strings pass through); repeatable",
    )

    parser = argparse.ArgumentParser(
        prog="floecast",
        description="Subseasonal-to-seasonal daily sea-ice concentration "
        "forecasting benchmark.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sub.add_parser(
        "synth", parents=[common], help="generate the configured synthetic archive"
    )
    sub.add_parser(
        "fit-eof",
        parents=[common],
        help="fit the linear orthonormal-basis compressor on the training split",
    )
    sub.add_parser(
        "train-ae",
        parents=[common],
        help="train the autoencoder compressor on the training split",
    )
    sub.add_parser(
        "encode", parents=[common], help="encode the archive into daily latents"
    )
    sub.add_parser(
        "train",
        parents=[common],
        help="train all configured latent backbones with unrolled forcing",
    )
    rollout = sub.add_parser(
        "rollout", parents=[common], help="save one decoded forecast run"
    )
    rollout.add_argument(
        "--backbone", required=True, help="model to roll out (e.g. dlinear)"
    )
    rollout.add_argument(
        "--init",
        default=None,
        metavar="YYYY-MM-DD",
        help="init date (defaults to the first strided test init)",
    )
    eval_s2s = sub.add_parser(
        "eval-s2s",
        parents=[common],
        help="score all models over strided test init dates",
    )
    eval_s2s.add_argument(
        "--compare-windows",
        action="store_true",
        help="also run the rolling-window comparison",
    )
    sub.add_parser(
        "eval-sio",
        parents=[common],
        help="September-mean extent skill at fixed pre-September init dates",
    )
    sub.add_parser(
        "extremes",
        parents=[common],
        help="September-minimum extent value/timing errors",
    )
    sub.add_parser(
        "ensemble",
        parents=[common],
        help="rank trained backbones and fit simplex ensemble weights",
    )
    sub.add_parser(
        "report", parents=[common], help="render the markdown summary"
    )
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.overrides)
    command = args.command
    if command == "synth":
        return pipeline.cmd_synth(cfg)
    if command == "fit-eof":
        return pipeline.cmd_fit_eof(cfg)
    if command == "train-ae":
        return pipeline.cmd_train_ae(cfg)
    if command == "encode":
        return pipeline.cmd_encode(cfg)
    if command == "train":
        return pipeline.cmd_train(cfg)
    if command == "rollout":
        return pipeline.cmd_rollout(cfg, args.backbone, args.init)
    if command == "eval-s2s":
        return pipeline.cmd_eval_s2s(cfg, compare_windows=args.compare_windows)
    if command == "eval-sio":
        return pipeline.cmd_eval_sio(cfg)
    if command == "extremes":
        return pipeline.cmd_extremes(cfg)
    if command == "ensemble":
        return pipeline.cmd_ensemble(cfg)
    if command == "report":
        return pipeline.cmd_report(cfg)
    raise ConfigError(f"unknown command {command!r}")  # pragma: no cover


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, BackboneError, RolloutError, EnsembleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ArchiveError, CompressionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
