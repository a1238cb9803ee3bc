"""Command line interface: ``mborel-amo <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from pydantic import BaseModel

from .arith import beta_estimate
from .config import ExperimentConfig, load_config
from .conversion import ExportFormat, csv_text, export, read_measure_csv
from .exceptions import ConfigError, ExportError, HypothesisError, MBorelError, RegimeError
from .harness import PIPELINES, frequency_from_config
from .measure import DiscreteMeasure, ScaleGrid, cantor_measure, dimension_report, m_borel
from .operator import AlmostMathieu, lyapunov
from .report import VerificationReport
from .schema import MBorelRow
from .spectral import TruncatedOperator, eigensolve

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_HARD_FAILURE = 1
EXIT_CONFIG = 2
EXIT_REGIME = 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment configuration (JSON)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", type=Path, help="write the result to this path")
    common.add_argument("--format", choices=("csv", "json"), default="json", help="output format (default: json)")
    common.add_argument("--force", action="store_true", help="overwrite an existing output file")
    common.add_argument(
        "--log-level",
        default="WARNING",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help="logging threshold (default: WARNING)",
    )

    parser = argparse.ArgumentParser(
        prog="mborel-amo",
        description="m-Borel dimension estimates and almost Mathieu operator numerics.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("beta", parents=[common], help="continued fraction and beta estimate of the frequency")
    commands.add_parser("spectrum", parents=[common], help="eigenvalues and delta_0/delta_1 amplitudes of H_N")

    dims = commands.add_parser("measure-dims", parents=[common], help="dimension report of a measure")
    _add_measure_source(dims)

    borel = commands.add_parser("mborel", parents=[common], help="evaluate J_{mu,m}(x, eps)")
    _add_measure_source(borel)
    borel.add_argument("--x", type=float, action="append", required=True, help="evaluation point (repeatable)")
    borel.add_argument("--eps", type=float, action="append", required=True, help="scale (repeatable)")
    borel.add_argument("--m", type=float, help="kernel exponent (default: config m)")

    lyap = commands.add_parser("lyapunov", parents=[common], help="Lyapunov exponent at given energies")
    lyap.add_argument("--energy", type=float, action="append", required=True, help="energy (repeatable)")
    lyap.add_argument("--steps", type=int, help="number of transfer steps (default: config)")

    for name in PIPELINES:
        commands.add_parser(name, parents=[common], help=f"run the {name} pipeline")

    commands.add_parser("schema", parents=[common], help="JSON Schemas of the config and the report")
    return parser


def _add_measure_source(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--measure", type=Path, help="measure CSV with position,weight columns")
    source.add_argument("--cantor", type=int, metavar="DEPTH", help="use the Cantor measure of this depth")
    parser.add_argument("--left-weight", type=float, default=0.5, help="left weight of the Cantor measure")


def _load(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    return config


def _measure(args: argparse.Namespace) -> DiscreteMeasure:
    if args.measure is not None:
        try:
            return read_measure_csv(args.measure)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read measure {args.measure}: {exc}") from exc
    return cantor_measure(args.cantor, args.left_weight)


def _emit(obj: object, args: argparse.Namespace) -> None:
    fmt: ExportFormat = args.format
    if args.out is not None:
        export(obj, fmt, args.out, force=args.force)
    elif fmt == "csv":
        sys.stdout.write(csv_text(obj))
    elif isinstance(obj, BaseModel):
        print(obj.model_dump_json(indent=2))
    else:
        print(json.dumps([row.model_dump(mode="json") for row in obj], indent=2))


def _run(args: argparse.Namespace) -> int:
    config = _load(args)
    cfg = config.numerics()

    if args.command == "schema":
        schemas = {
            "ExperimentConfig": ExperimentConfig.model_json_schema(),
            "VerificationReport": VerificationReport.model_json_schema(mode="serialization"),
        }
        text = json.dumps(schemas, indent=2, sort_keys=True)
        if args.out is None:
            print(text)
        else:
            if args.out.exists() and not args.force:
                raise ExportError(f"{args.out} exists; pass --force to overwrite")
            args.out.write_text(text + "\n", encoding="utf-8")
        return EXIT_OK

    if args.command in PIPELINES:
        report = PIPELINES[args.command](config)
        _emit(report, args)
        for check in report.soft_failures:
            LOGGER.warning("soft check %s failed: measured %s vs %s", check.name, check.measured, check.bound)
        return EXIT_OK if report.passed else EXIT_HARD_FAILURE

    if args.command == "beta":
        freq = frequency_from_config(config)
        _emit(freq if args.format == "csv" else beta_estimate(freq, config.frequency.tail_start), args)
        return EXIT_OK

    if args.command in ("spectrum", "lyapunov"):
        op = AlmostMathieu(coupling_lambda=config.coupling_lambda, freq=frequency_from_config(config), theta=config.theta)
        if args.command == "spectrum":
            data = eigensolve(TruncatedOperator.centered(op, config.truncation_n), (0, 1), config=cfg)
            _emit(data, args)
        else:
            steps = args.steps or config.transition.lyapunov_steps
            _emit([lyapunov(op, energy, steps, config=cfg) for energy in args.energy], args)
        return EXIT_OK

    mu = _measure(args)
    if args.command == "measure-dims":
        grid = ScaleGrid.geometric(config.scale_grid.base, config.scale_grid.k_min, config.scale_grid.k_max)
        report = dimension_report(mu, grid, config.q_list, config.m, config.n_samples, config.seed, config=cfg)
        _emit(report, args)
        return EXIT_OK

    m = args.m if args.m is not None else config.m
    rows = [
        MBorelRow(x=x, eps=eps, m=m, value=m_borel(mu, m, x, eps, config=cfg))
        for x in args.x
        for eps in args.eps
    ]
    _emit(rows, args)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except (ConfigError, ExportError) as exc:
        print(f"[error] {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RegimeError, HypothesisError) as exc:
        print(f"[refused] {exc}", file=sys.stderr)
        return EXIT_REGIME
    except MBorelError as exc:
        print(f"[error] {exc}", file=sys.stderr)
        return EXIT_HARD_FAILURE
    except ValueError as exc:
        print(f"[error] {exc}", file=sys.stderr)
        return EXIT_CONFIG
