"""gtp-cxr command-line tool.

Usage:
    python cli.py gen-data --out data/synth
    python cli.py train --data data/synth --loss balce --gtp on --out runs/gtp.ckpt
    python cli.py eval --ckpt runs/gtp.ckpt --data data/synth --preds gtp.csv --report gtp.json
    python cli.py ensemble --preds a.csv b.csv --method average --report avg.json
    python cli.py report --reports gtp.json avg.json --out table.csv
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, NoReturn, Optional

from rich.console import Console

from cxr.commands import (
    CommandResult,
    Split,
    cmd_ensemble,
    cmd_eval,
    cmd_gen_data,
    cmd_report,
    cmd_train,
    print_resolved_config,
    run_command,
)
from cxr.config.loader import load_synth_config, load_train_config, shipped_config
from cxr.config.schema import EdgeMode, EnsembleMethod, LossKind, load_runtime_settings
from cxr.errors import VALIDATION_EXIT_CODE
from cxr.monitoring.logger import initialize_logger

console = Console()


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the validation code instead of argparse's 2."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(VALIDATION_EXIT_CODE, f"{self.prog}: error: {message}\n")


def _weights(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"weights must be comma-separated numbers: {exc}")


def _add_logging_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR.")
    parser.add_argument("--log-json", action="store_true", help="Emit JSON log lines.")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="gtp-cxr",
        description="Chest X-ray classification with batch-graph refinement.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    gen = subparsers.add_parser(
        "gen-data",
        help="Render the synthetic imbalanced dataset.",
        description="Write PGM images, labels.csv and manifest.json into --out.",
    )
    gen.add_argument("--config", type=Path, default=None, help="SynthConfig JSON file.")
    gen.add_argument("--out", type=Path, required=True, help="Output directory.")
    gen.add_argument("--seed", type=int, default=None, help="Generator seed.")
    gen.add_argument("--image-size", type=int, default=None, help="Square image side.")
    _add_logging_flags(gen)
    gen.set_defaults(handler=_handle_gen_data)

    train = subparsers.add_parser(
        "train",
        help="Train a GTP network or its DNN baseline.",
        description="Train on the 4:1 stratified split of --data; flags override --config.",
    )
    train.add_argument("--config", type=Path, default=None, help="TrainConfig JSON or 'desk'.")
    train.add_argument("--data", type=Path, default=None, help="Labelled image directory.")
    train.add_argument("--loss", choices=[k.value for k in LossKind], default=None)
    train.add_argument("--gtp", choices=["on", "off"], default=None, help="Graph blocks on/off.")
    train.add_argument("--epochs", type=int, default=None)
    train.add_argument("--batch", type=int, default=None, help="Training batch size.")
    train.add_argument("--eval-batch", type=int, default=None, help="Evaluation batch size.")
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--out", type=Path, default=None, help="Final checkpoint path.")
    train.add_argument("--d", type=int, default=None, help="Graph hidden width.")
    train.add_argument("--feature-dim", type=int, default=None, help="Encoder output width.")
    train.add_argument("--heads", type=int, default=None)
    train.add_argument("--edge-mode", choices=[m.value for m in EdgeMode], default=None)
    train.add_argument("--image-size", type=int, default=None)
    train.add_argument("--lr", type=float, default=None, help="Learning rate.")
    train.add_argument(
        "--freeze-encoder", action="store_true", help="Keep encoder weights fixed."
    )
    _add_logging_flags(train)
    train.set_defaults(handler=_handle_train)

    evaluate = subparsers.add_parser(
        "eval",
        help="Evaluate a checkpoint.",
        description="Write predictions, a metrics report, a confusion CSV and ROC CSVs.",
    )
    evaluate.add_argument("--ckpt", type=Path, required=True)
    evaluate.add_argument("--data", type=Path, required=True)
    evaluate.add_argument("--preds", type=Path, required=True, help="Prediction CSV to write.")
    evaluate.add_argument("--report", type=Path, required=True, help="Metrics JSON to write.")
    evaluate.add_argument("--split", choices=[s.value for s in Split], default=Split.TEST.value)
    evaluate.add_argument("--batch", type=int, default=32, help="Evaluation batch size.")
    evaluate.add_argument("--model-id", default=None, help="Defaults to the checkpoint stem.")
    _add_logging_flags(evaluate)
    evaluate.set_defaults(handler=_handle_eval)

    ensemble = subparsers.add_parser(
        "ensemble",
        help="Combine prediction files.",
        description="Max voting, averaging or weighted averaging of aligned prediction CSVs.",
    )
    ensemble.add_argument("--preds", type=Path, nargs="+", required=True)
    ensemble.add_argument(
        "--method", choices=[m.value for m in EnsembleMethod], default="average"
    )
    ensemble.add_argument("--weights", type=_weights, default=None, help="e.g. 0.5,0.3,0.2")
    ensemble.add_argument("--report", type=Path, required=True)
    ensemble.add_argument("--out", type=Path, default=None, help="Combined prediction CSV.")
    ensemble.add_argument("--model-id", default=None)
    _add_logging_flags(ensemble)
    ensemble.set_defaults(handler=_handle_ensemble)

    report = subparsers.add_parser(
        "report",
        help="Merge metric reports into a comparison table.",
        description="One row per report: model, macro-F1, AUC per class.",
    )
    report.add_argument("--reports", type=Path, nargs="+", required=True)
    report.add_argument("--out", type=Path, required=True)
    _add_logging_flags(report)
    report.set_defaults(handler=_handle_report)

    return parser


def _init_logging(args: argparse.Namespace) -> int:
    settings = load_runtime_settings(log_level=args.log_level, log_json=args.log_json or None)
    initialize_logger(settings)
    return settings.prefetch_batches


def _finish(result: CommandResult) -> int:
    if result.exit_code != 0:
        print(f"EXIT reason={result.reason} code={result.exit_code}", file=sys.stderr)
    return result.exit_code


def _handle_gen_data(args: argparse.Namespace) -> int:
    def action() -> None:
        _init_logging(args)
        config_path = args.config or shipped_config("synth")
        config = load_synth_config(
            config_path, {"seed": args.seed, "image_size": args.image_size}
        )
        print_resolved_config(
            "gen-data", {"out": args.out, **config.model_dump(mode="json")}, console
        )
        cmd_gen_data(config, args.out)

    return _finish(run_command("gen-data", action))


def _train_overrides(args: argparse.Namespace) -> dict[str, Any]:
    use_gtp: Optional[bool] = None if args.gtp is None else args.gtp == "on"
    return {
        "data_dir": args.data,
        "loss": args.loss,
        "epochs": args.epochs,
        "batch_size": args.batch,
        "eval_batch_size": args.eval_batch,
        "seed": args.seed,
        "checkpoint_path": args.out,
        "image_size": args.image_size,
        "learning_rate": args.lr,
        "model": {
            "use_gtp": use_gtp,
            "hidden_dim": args.d,
            "feature_dim": args.feature_dim,
            "heads": args.heads,
            "edge_mode": args.edge_mode,
            "freeze_encoder": True if args.freeze_encoder else None,
        },
    }


def _handle_train(args: argparse.Namespace) -> int:
    def action() -> None:
        prefetch = _init_logging(args)
        config = load_train_config(args.config, _train_overrides(args))
        print_resolved_config("train", config.model_dump(mode="json"), console)
        cmd_train(config, prefetch_depth=prefetch)

    return _finish(run_command("train", action))


def _handle_eval(args: argparse.Namespace) -> int:
    def action() -> None:
        _init_logging(args)
        print_resolved_config(
            "eval",
            {
                "ckpt": args.ckpt,
                "data": args.data,
                "preds": args.preds,
                "report": args.report,
                "split": args.split,
                "batch": args.batch,
                "model_id": args.model_id,
            },
            console,
        )
        cmd_eval(
            args.ckpt,
            args.data,
            args.preds,
            args.report,
            split=Split(args.split),
            eval_batch_size=args.batch,
            model_id=args.model_id,
        )

    return _finish(run_command("eval", action))


def _handle_ensemble(args: argparse.Namespace) -> int:
    def action() -> None:
        _init_logging(args)
        print_resolved_config(
            "ensemble",
            {
                "preds": [str(p) for p in args.preds],
                "method": args.method,
                "weights": args.weights,
                "report": args.report,
                "out": args.out,
            },
            console,
        )
        cmd_ensemble(
            args.preds,
            EnsembleMethod(args.method),
            args.weights,
            args.report,
            out_path=args.out,
            model_id=args.model_id,
        )

    return _finish(run_command("ensemble", action))


def _handle_report(args: argparse.Namespace) -> int:
    def action() -> None:
        _init_logging(args)
        print_resolved_config(
            "report", {"reports": [str(p) for p in args.reports], "out": args.out}, console
        )
        cmd_report(args.reports, args.out, console=console)

    return _finish(run_command("report", action))


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = getattr(args, "handler", None)
    if handler is None:
        parser.print_help()
        return 1
    return int(handler(args))


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
