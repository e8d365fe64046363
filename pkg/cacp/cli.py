# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
`cli`
====================================================

The ``cacp`` command.

Example::

    cacp synth --config run.yaml --out data/
    cacp backtest --config run.yaml --in data/ --out results/ --set delta_rec=7
    cacp backtest --in data/ --out fleet-results/ --fleet
    cacp evaluate --in results/
    cacp tune-report --in results/

``--set key=value`` applies to the command's own config section; prefix the key
with ``synth.``, ``backtest.`` or ``schema.`` to reach another one.

"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .backtest import METHODS, BacktestConfig, run_backtest
from .io import (
    FLEET_SITE,
    DatasetSchema,
    aggregate_fleet,
    ingest,
    read_site_metadata,
    write_dataset,
)
from .io.config import SECTIONS, load_config
from .io.reports import (
    INTERVALS_FILE,
    emit_reports,
    evaluate_path,
    read_tuning_history,
    to_json,
    tuning_report,
)
from .synth import SynthSpec, generate

try:
    from typing import Dict, Optional, Sequence

    from .io.config import ConfigBase
except ImportError:
    pass

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

logger = logging.getLogger(__name__)

DATASET_FILE = "dataset.csv"
"""File name `synth` writes and `backtest` looks for in an input directory."""

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _common_arguments() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="log warnings only")
    return parser


def _config_arguments() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument(
        "--config", type=Path, help="YAML file with synth, backtest and schema sections"
    )
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config value after the file is read; repeatable",
    )
    parser.add_argument("--seed", type=int, help="random seed")
    return parser


def build_parser() -> argparse.ArgumentParser:
    """Parser of every ``cacp`` command."""
    common = _common_arguments()
    config = _config_arguments()
    parser = argparse.ArgumentParser(
        prog="cacp", description="Context-aware conformal calibration of solar quantile forecasts."
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    synth = commands.add_parser(
        "synth", parents=[common, config], help="write a synthetic dataset"
    )
    synth.add_argument(
        "--out", type=Path, required=True, help="directory to write {} into".format(DATASET_FILE)
    )

    backtest = commands.add_parser(
        "backtest", parents=[common, config], help="run the rolling backtest and write reports"
    )
    backtest.add_argument(
        "--in",
        dest="input",
        type=Path,
        required=True,
        help="dataset CSV, or a directory holding {}".format(DATASET_FILE),
    )
    backtest.add_argument("--out", type=Path, required=True, help="report directory")
    backtest.add_argument(
        "--workers", type=int, help="parallel site workers (default: number of CPUs)"
    )
    backtest.add_argument(
        "--methods", nargs="+", choices=METHODS, metavar="METHOD", help="methods to run"
    )
    backtest.add_argument(
        "--alphas", nargs="+", type=float, metavar="ALPHA", help="miscoverage rates"
    )
    backtest.add_argument(
        "--fleet",
        action="store_true",
        help="backtest the capacity-weighted aggregate of all sites as one series",
    )

    evaluate = commands.add_parser(
        "evaluate", parents=[common], help="recompute metrics from an interval file"
    )
    evaluate.add_argument(
        "--in",
        dest="input",
        type=Path,
        required=True,
        help="{} or the report directory holding it".format(INTERVALS_FILE),
    )
    evaluate.add_argument("--out", type=Path, help="write the summary here instead of stdout")
    evaluate.add_argument(
        "--pooled", action="store_true", help="pool sites instead of averaging per-site metrics"
    )

    report = commands.add_parser(
        "tune-report", parents=[common], help="tabulate the tuning history of a backtest"
    )
    report.add_argument(
        "--in",
        dest="input",
        type=Path,
        required=True,
        help="tuning_history.json or the report directory holding it",
    )
    report.add_argument("--out", type=Path, help="write a CSV here instead of stdout")
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(stream=sys.stderr, level=level, format=LOG_FORMAT)
    logging.getLogger("cacp").setLevel(level)


def _load_sections(args: argparse.Namespace) -> Dict[str, ConfigBase]:
    raw = load_config(args.config) if args.config else {section: {} for section in SECTIONS}
    configs = {
        "backtest": BacktestConfig.from_mapping(raw["backtest"]),
        "synth": SynthSpec.from_mapping(raw["synth"]),
        "schema": DatasetSchema.from_mapping(raw["schema"]),
    }
    default_section = "synth" if args.command == "synth" else "backtest"
    for override in args.overrides:
        section, dot, rest = override.strip().partition(".")
        if dot and section in configs:
            configs[section].apply_overrides([rest])
        else:
            configs[default_section].apply_overrides([override])
    return configs


def _log_resolved(name: str, config: ConfigBase) -> None:
    logger.info("resolved %s config: %s", name, json.dumps(config.as_dict(), sort_keys=True))


def _run_synth(args: argparse.Namespace) -> int:
    spec = _load_sections(args)["synth"]
    if args.seed is not None:
        spec.noise_seed = args.seed
    _log_resolved("synth", spec)
    data = generate(spec)
    args.out.mkdir(parents=True, exist_ok=True)
    write_dataset(args.out / DATASET_FILE, data.series, data.geometries)
    return 0


def _run_backtest(args: argparse.Namespace) -> int:
    configs = _load_sections(args)
    config = configs["backtest"]
    schema = configs["schema"]
    if args.seed is not None:
        config.seed = args.seed
    if args.workers is not None:
        config.workers = args.workers
    if args.methods:
        config.methods = args.methods
    if args.alphas:
        config.alpha_grid = args.alphas
    _log_resolved("backtest", config)
    _log_resolved("schema", schema)
    path = args.input / DATASET_FILE if args.input.is_dir() else args.input
    data = ingest(path, schema)
    if args.fleet:
        data = {FLEET_SITE: aggregate_fleet(data, read_site_metadata(path, schema))}
    result = run_backtest(data, config)
    emit_reports(result, args.out)
    for method in sorted(result.reports):
        for row in result.reports[method].rows(method):
            logger.info(
                "%-12s alpha=%.2f PICP=%.4f AIW=%.4f WS=%.4f",
                method,
                row["alpha"],
                row["picp"],
                row["aiw"],
                row["winkler"],
            )
    return 0


def _run_evaluate(args: argparse.Namespace) -> int:
    summary = evaluate_path(args.input, pooled=args.pooled)
    text = to_json(summary)
    if args.out:
        args.out.write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def _run_tune_report(args: argparse.Namespace) -> int:
    frame = tuning_report(read_tuning_history(args.input))
    if args.out:
        frame.to_csv(args.out, index=False)
    else:
        print(frame.to_string(index=False))
    return 0


COMMANDS = {
    "synth": _run_synth,
    "backtest": _run_backtest,
    "evaluate": _run_evaluate,
    "tune-report": _run_tune_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one ``cacp`` command.

    :return: 0 on success, 1 on a fatal pipeline error, 2 on a usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    _configure_logging(args)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError, RuntimeError) as error:
        message = error.args[0] if isinstance(error, KeyError) and error.args else error
        logger.error("%s failed: %s", args.command, message)
        return 1


if __name__ == "__main__":
    sys.exit(main())
