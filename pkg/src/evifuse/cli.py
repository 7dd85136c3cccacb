"""Command line entry points: train, eval, fuse, gen-data.

Exit codes: 0 success, 2 usage or configuration errors (including malformed
fuse input), 3 data errors, 4 checkpoint errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .config import ConfigError, RunConfig
from .data import (
    DataFormatError,
    apply_scaler,
    generate_synthetic,
    inject_noise_views,
    inject_unaligned_views,
    invert_scaler,
    load_csv,
    save_csv,
)
from .evaluation import evaluate, export_report, multi_run, run_experiment
from .network import load_checkpoint, save_checkpoint
from .opinions import (
    Evidence,
    Opinion,
    conflictive_degree,
    decide,
    evidence_to_opinion,
    fuse_opinions,
)

__all__ = ["main", "EXIT_OK", "EXIT_USAGE", "EXIT_DATA", "EXIT_CHECKPOINT"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CHECKPOINT = 4


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _check_injection_args(args) -> str | None:
    for name in ("noise_fraction", "unaligned_fraction"):
        value = getattr(args, name, 0.0)
        if not (0.0 <= value <= 1.0):
            return f"--{name.replace('_', '-')} must lie in [0, 1]"
    if getattr(args, "noise_sigma", 0.0) < 0.0:
        return "--noise-sigma must be nonnegative"
    return None


def _inject(dataset, args):
    if args.noise_fraction > 0.0:
        dataset = inject_noise_views(dataset, args.noise_fraction, args.noise_sigma, args.seed)
    if args.unaligned_fraction > 0.0:
        dataset = inject_unaligned_views(dataset, args.unaligned_fraction, args.seed)
    return dataset


def _print_report_summary(report) -> None:
    print(f"accuracy: {report.accuracy:.4f}")
    if report.accuracy_normal is not None:
        print(f"accuracy_normal: {report.accuracy_normal:.4f}")
    if report.accuracy_conflictive is not None:
        print(f"accuracy_conflictive: {report.accuracy_conflictive:.4f}")
    for group in ("normal", "conflictive"):
        stats = report.group_stats.get(group)
        if stats is not None:
            print(f"mean_uncertainty_{group}: {stats['mean_uncertainty']:.4f}")
            print(f"mean_conflict_{group}: {stats['mean_pairwise_conflict']:.4f}")


# ----------------------------------------------------------------------
# train
# ----------------------------------------------------------------------


def _cmd_train(args) -> int:
    try:
        config = RunConfig.from_file(args.config)
        if args.output_dir is not None:
            config = config.with_overrides(output_dir=args.output_dir)
    except OSError as exc:
        return _fail(EXIT_USAGE, f"cannot read config: {exc}")
    except ConfigError as exc:
        return _fail(EXIT_USAGE, str(exc))

    run_name = config.config_hash()
    if not args.no_timestamp:
        run_name += "-" + time.strftime("%Y%m%d-%H%M%S")
    run_dir = os.path.join(config.output_dir, run_name)

    try:
        aggregate = None
        if config.runs > 1:
            results, aggregate = multi_run(config)
            result = results[0]
        else:
            result = run_experiment(config)
    except DataFormatError as exc:
        return _fail(EXIT_DATA, str(exc))
    except ValueError as exc:
        return _fail(EXIT_DATA, str(exc))

    os.makedirs(run_dir, exist_ok=True)
    with open(os.path.join(run_dir, "config.txt"), "w") as fh:
        fh.write(config.canonical())
    save_checkpoint(result.net, os.path.join(run_dir, "checkpoint.json"), scaler=result.scaler)
    with open(os.path.join(run_dir, "trace.jsonl"), "w") as fh:
        for record in result.trace.to_records():
            fh.write(json.dumps(record, sort_keys=True))
            fh.write("\n")
    export_report(result.report, os.path.join(run_dir, "report.json"))
    # the pipeline scores a standardized test set; export it in original
    # feature units so eval (which applies the checkpoint scaler itself)
    # reproduces this run's report from these files
    save_csv(invert_scaler(result.test_set, result.scaler), os.path.join(run_dir, "test_data"))
    if aggregate is not None:
        with open(os.path.join(run_dir, "aggregate.json"), "w") as fh:
            json.dump(aggregate, fh, indent=2, sort_keys=True)
            fh.write("\n")

    print(f"run_dir: {run_dir}")
    _print_report_summary(result.report)
    return EXIT_OK


# ----------------------------------------------------------------------
# eval
# ----------------------------------------------------------------------


def _cmd_eval(args) -> int:
    message = _check_injection_args(args)
    if message is not None:
        return _fail(EXIT_USAGE, message)
    try:
        net, scaler = load_checkpoint(args.checkpoint)
    except OSError as exc:
        return _fail(EXIT_CHECKPOINT, f"cannot read checkpoint: {exc}")
    except (ValueError, KeyError, TypeError) as exc:
        return _fail(EXIT_CHECKPOINT, f"bad checkpoint {args.checkpoint}: {exc}")
    try:
        dataset = load_csv(args.data)
    except DataFormatError as exc:
        return _fail(EXIT_DATA, str(exc))
    if scaler is not None and len(scaler[0]) != dataset.n_views:
        return _fail(
            EXIT_DATA,
            f"checkpoint scaler covers {len(scaler[0])} views, data has {dataset.n_views}",
        )
    try:
        if scaler is not None:
            dataset = apply_scaler(dataset, scaler)
        dataset = _inject(dataset, args)
        report = evaluate(net, dataset)
    except ValueError as exc:
        return _fail(EXIT_DATA, str(exc))
    export_report(report, args.output)
    print(f"report: {args.output}")
    _print_report_summary(report)
    return EXIT_OK


# ----------------------------------------------------------------------
# fuse
# ----------------------------------------------------------------------


def _parse_fuse_items(text: str) -> list:
    text = text.strip()
    if not text:
        raise ValueError("empty input; expected a JSON array or JSON lines of opinions")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError:
        payload = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"stdin:{lineno}: not valid JSON: {exc}") from None
    if isinstance(payload, dict):
        payload = [payload]
    if not isinstance(payload, list) or not payload:
        raise ValueError("expected a non-empty JSON array of opinion objects")
    return payload


def _item_to_opinion(item, position: int) -> Opinion:
    if not isinstance(item, dict):
        raise ValueError(f"opinion {position}: expected an object, got {type(item).__name__}")
    try:
        if "evidence" in item:
            return evidence_to_opinion(Evidence(e=np.asarray(item["evidence"], dtype=np.float64)))
        if {"belief", "uncertainty", "base_rate"} <= item.keys():
            return Opinion.from_dict(item)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"opinion {position}: {exc}") from None
    raise ValueError(
        f"opinion {position}: need either 'evidence' or 'belief'/'uncertainty'/'base_rate'"
    )


def _cmd_fuse(args) -> int:
    try:
        items = _parse_fuse_items(sys.stdin.read())
        opinions = [_item_to_opinion(item, i) for i, item in enumerate(items)]
        widths = {op.n_classes for op in opinions}
        if len(widths) > 1:
            raise ValueError(f"opinions disagree on class count: {sorted(widths)}")
        fused = fuse_opinions(opinions)
        label, reliability = decide(fused)
        conflicts = [
            {
                "views": [i, j],
                "degree": conflictive_degree(opinions[i], opinions[j]),
            }
            for i in range(len(opinions))
            for j in range(i + 1, len(opinions))
        ]
    except (ValueError, TypeError) as exc:
        return _fail(EXIT_USAGE, str(exc))
    payload = {
        "fused": fused.to_dict(),
        "decision": label,
        "reliability": reliability,
        "conflicts": conflicts,
    }
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


# ----------------------------------------------------------------------
# gen-data
# ----------------------------------------------------------------------


def _cmd_gen_data(args) -> int:
    message = _check_injection_args(args)
    if message is not None:
        return _fail(EXIT_USAGE, message)
    try:
        dims = tuple(int(part.strip()) for part in args.dim.split(","))
    except ValueError:
        return _fail(EXIT_USAGE, f"--dim expects an int or comma-separated ints, got {args.dim!r}")
    if len(dims) == 1:
        dims = dims * args.views
    try:
        dataset = generate_synthetic(
            args.views, args.classes, args.instances, dims, args.separation, args.seed
        )
        dataset = _inject(dataset, args)
    except ValueError as exc:
        return _fail(EXIT_USAGE, str(exc))
    save_csv(dataset, args.output)
    print(
        f"wrote {dataset.n_instances} instances, {dataset.n_views} views, "
        f"{dataset.n_classes} classes to {args.output}"
    )
    return EXIT_OK


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------


def _add_injection_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--noise-fraction", type=float, default=0.0,
        help="fraction of instances receiving one Gaussian-noise view",
    )
    parser.add_argument(
        "--noise-sigma", type=float, default=0.0,
        help="noise scale for --noise-fraction",
    )
    parser.add_argument(
        "--unaligned-fraction", type=float, default=0.0,
        help="fraction of instances with one view swapped from another class",
    )
    parser.add_argument("--seed", type=int, default=0, help="generation / injection seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evifuse",
        description="Evidential multi-view classification with conflict-aware fusion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train from a config file and write a run directory")
    train.add_argument("--config", required=True, help="path to a key = value config file")
    train.add_argument(
        "--output-dir", default=None,
        help="override output_dir from the config (not part of the run hash)",
    )
    train.add_argument(
        "--no-timestamp", action="store_true",
        help="name the run directory by config hash alone (repeat runs overwrite)",
    )

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a CSV dataset")
    ev.add_argument("--checkpoint", required=True, help="checkpoint.json from train")
    ev.add_argument("--data", required=True, help="directory with view_*.csv and labels.csv")
    ev.add_argument("--output", default="eval_report.json", help="where to write the report")
    _add_injection_args(ev)

    sub.add_parser(
        "fuse",
        help="fuse opinions read from stdin (JSON array or JSON lines) and print the result",
    )

    gen = sub.add_parser("gen-data", help="write synthetic multi-view CSV data")
    gen.add_argument("--output", required=True, help="target directory")
    gen.add_argument("--views", type=int, default=3)
    gen.add_argument("--classes", type=int, default=4)
    gen.add_argument("--instances", type=int, default=1000)
    gen.add_argument("--dim", default="10", help="feature width, one int or per-view comma list")
    gen.add_argument("--separation", type=float, default=5.0)
    _add_injection_args(gen)

    return parser


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "fuse": _cmd_fuse,
    "gen-data": _cmd_gen_data,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
