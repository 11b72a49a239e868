"""Command-line interface.

Subcommands:
  value    value a training set with one or more methods
  remove   removal experiment from stored values
  report   aggregate stored curves into summary.csv / summary.json
  all      value -> remove -> report in one run

Failures exit nonzero and print a one-line JSON object
{"error": <type>, "message": <text>} on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiment import (
    RunConfig,
    SyntheticSpec,
    emit_report,
    load_curves,
    load_run_config,
    load_values,
    parse_method,
    run_pipeline,
    run_removal_experiment,
    run_valuation_suite,
)
from .model import TrainConfig

__all__ = ["main"]


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse normally exits with plain-text usage; route through the JSON path
    def error(self, message):
        raise CliError(message)


def parse_synthetic_spec(text: str) -> SyntheticSpec:
    """Parse 'n_per_class=100,d=2,separation=2.0,noise=0.2' (n_per_class required)."""
    fields = {}
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise CliError(f"bad synthetic spec entry {chunk!r}; expected key=value")
        key, value = chunk.split("=", 1)
        fields[key.strip()] = value.strip()
    known = {"n_per_class", "d", "separation", "noise"}
    unknown = set(fields) - known
    if unknown:
        raise CliError(f"unknown synthetic spec keys {sorted(unknown)}; known: {sorted(known)}")
    if "n_per_class" not in fields:
        raise CliError("synthetic spec needs n_per_class, e.g. n_per_class=100")
    return SyntheticSpec(
        n_per_class=int(fields["n_per_class"]),
        d=int(fields.get("d", 2)),
        class_separation=float(fields.get("separation", 2.0)),
        noise_fraction=float(fields.get("noise", 0.0)),
    )


def _add_data_options(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", metavar="CSV", help="path to a headered CSV dataset")
    src.add_argument(
        "--synthetic",
        metavar="SPEC",
        help="synthetic dataset spec, e.g. 'n_per_class=100,d=2,separation=2.0,noise=0.2'",
    )
    p.add_argument("--label-column", default="label", help="label column name (default: label)")
    p.add_argument(
        "--valid-fraction",
        type=float,
        default=0.25,
        help="validation share of the data (default: 0.25)",
    )
    p.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")
    p.add_argument(
        "--standardize",
        action="store_true",
        help="z-score features using train-split statistics",
    )


def _add_method_options(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--method",
        action="append",
        required=True,
        metavar="TAG",
        help="valuation method (repeatable): loo | tmc | pshapley:ACT | "
        "beta:A:B | exact[:ACT]",
    )
    p.add_argument(
        "--permutations", type=int, default=500, help="Monte Carlo permutations (default: 500)"
    )
    p.add_argument(
        "--epsilon", type=float, default=0.001, help="truncation threshold (default: 0.001)"
    )
    p.add_argument(
        "--swish-beta", type=float, default=1.0, help="Swish slope parameter (default: 1)"
    )
    p.add_argument(
        "--learning-rate", type=float, default=0.1, help="trainer learning rate (default: 0.1)"
    )
    p.add_argument(
        "--iterations", type=int, default=500, help="trainer gradient steps (default: 500)"
    )
    p.add_argument(
        "--l2", type=float, default=1e-4, help="trainer L2 penalty (default: 1e-4)"
    )
    p.add_argument(
        "--oracle-cap",
        type=int,
        default=16,
        help="largest n allowed for exact enumeration (default: 16)",
    )


def _build_parser() -> _Parser:
    parser = _Parser(prog="pshapley", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_value = sub.add_parser("value", parents=[], help="run a valuation suite")
    _add_data_options(p_value)
    _add_method_options(p_value)
    p_value.add_argument("--out", required=True, help="run directory to create/fill")

    p_remove = sub.add_parser("remove", help="removal experiment from stored values")
    p_remove.add_argument("--out", required=True, help="existing run directory")
    p_remove.add_argument(
        "--removal-count", type=int, required=True, help="how many top-value points to remove"
    )
    p_remove.add_argument(
        "--method",
        action="append",
        metavar="TAG",
        help="restrict to these stored methods (default: all from config.json)",
    )

    p_report = sub.add_parser("report", help="aggregate stored curves into a summary")
    p_report.add_argument("--out", required=True, help="existing run directory")

    p_all = sub.add_parser("all", help="value + remove + report pipeline")
    _add_data_options(p_all)
    _add_method_options(p_all)
    p_all.add_argument("--out", required=True, help="run directory to create/fill")
    p_all.add_argument(
        "--removal-count", type=int, required=True, help="how many top-value points to remove"
    )
    return parser


def _config_from_args(args, *, removal_count=None) -> RunConfig:
    methods = tuple(parse_method(t, swish_beta=args.swish_beta) for t in args.method)
    synthetic = parse_synthetic_spec(args.synthetic) if args.synthetic else None
    return RunConfig(
        methods=methods,
        out_dir=args.out,
        csv_path=args.data,
        label_column=args.label_column,
        synthetic=synthetic,
        valid_fraction=args.valid_fraction,
        seed=args.seed,
        standardize=args.standardize,
        train_config=TrainConfig(
            learning_rate=args.learning_rate,
            iterations=args.iterations,
            l2_penalty=args.l2,
            seed=args.seed,
        ),
        permutations=args.permutations,
        epsilon=args.epsilon,
        removal_count=removal_count,
        oracle_cap=args.oracle_cap,
    )


def _cmd_value(args) -> int:
    config = _config_from_args(args)
    results = run_valuation_suite(config)
    print(json.dumps({"out": args.out, "methods": sorted(results.keys())}))
    return 0


def _cmd_remove(args) -> int:
    from dataclasses import replace

    config = replace(load_run_config(args.out), removal_count=args.removal_count)
    values = load_values(args.out, args.method)
    for result in values.values():
        run_removal_experiment(config, result)
    print(json.dumps({"out": args.out, "curves": sorted(values.keys())}))
    return 0


def _cmd_report(args) -> int:
    curves = load_curves(args.out)
    paths = emit_report(curves, args.out)
    print(json.dumps(paths))
    return 0


def _cmd_all(args) -> int:
    config = _config_from_args(args, removal_count=args.removal_count)
    out = run_pipeline(config)
    print(
        json.dumps(
            {
                "out": args.out,
                "methods": sorted(out["values"].keys()),
                "report": out["report"],
            }
        )
    )
    return 0


_COMMANDS = {"value": _cmd_value, "remove": _cmd_remove, "report": _cmd_report, "all": _cmd_all}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit:
        raise
    except BaseException as exc:  # noqa: BLE001 - single JSON error surface
        if isinstance(exc, KeyboardInterrupt):
            raise
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
