from __future__ import annotations

import argparse
import logging
from dataclasses import replace
from pathlib import Path

from relay_csi import __version__
from relay_csi.channel_models import distribution_from_name
from relay_csi.config import RunnerConfig, load_config, save_config
from relay_csi.errors import InvalidInput, NumericalError
from relay_csi.experiments import load_spec, run, validate_spec
from relay_csi.logging_setup import setup_logging
from relay_csi.paths import config_path, results_dir
from relay_csi.quantizer import (
    design_fixed_point,
    design_general,
    design_max_entropy,
    design_uniform,
)
from relay_csi.resource_alloc import db_to_linear
from relay_csi.settings import DEFAULT_SETTINGS

EXIT_OK = 0
EXIT_SPEC = 2
EXIT_NUMERICAL = 3

_METHODS = ("uniform", "general", "fixed-point", "max-entropy")

logger = logging.getLogger("relay_csi.cli")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relay-csi",
        description="Quantized-CSI design and loss experiments for single-relay networks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    run_cmd = commands.add_parser("run", help="run an experiment spec")
    run_cmd.add_argument("--spec", type=Path, required=True)
    run_cmd.add_argument("--out", type=Path, default=None)
    run_cmd.add_argument("--workers", type=int, default=None)

    validate_cmd = commands.add_parser("validate", help="check an experiment spec")
    validate_cmd.add_argument("--spec", type=Path, required=True)

    design_cmd = commands.add_parser("design", help="print a quantization vector as JSON")
    design_cmd.add_argument("--dist", required=True)
    design_cmd.add_argument("--snr-db", type=float, required=True)
    design_cmd.add_argument("--levels", type=int, required=True)
    design_cmd.add_argument("--method", choices=_METHODS, default="general")

    commands.add_parser("init-config", help="write the default config file")
    return parser


def _design(args: argparse.Namespace) -> int:
    dist = distribution_from_name(args.dist)
    gamma = db_to_linear(args.snr_db)
    if args.method == "uniform":
        if dist.kind != "uniform":
            raise InvalidInput("the uniform designer only applies to the uniform law")
        q = design_uniform(args.levels, gamma)
    elif args.method == "general":
        q = design_general(args.levels, gamma, dist)
    elif args.method == "fixed-point":
        q = design_fixed_point(args.levels, gamma, dist)
    else:
        q = design_max_entropy(args.levels, dist, gamma)
    print(q.to_json())
    return EXIT_OK


def _dispatch(args: argparse.Namespace, config: RunnerConfig) -> int:
    if args.command == "init-config":
        path = config_path()
        save_config(path, config)
        print(path)
        return EXIT_OK
    if args.command == "design":
        return _design(args)
    spec = load_spec(args.spec)
    if args.command == "validate":
        for warning in validate_spec(spec):
            print(f"{warning.code} ({warning.field}): {warning.message}")
        return EXIT_OK
    out_dir = args.out or config.output_dir or results_dir() / spec.scenario.file_stem
    workers = args.workers if args.workers is not None else config.workers
    if workers < 1:
        raise InvalidInput("--workers must be positive")
    settings = DEFAULT_SETTINGS
    if config.chunk_size is not None:
        settings = replace(settings, chunk_size=config.chunk_size)
    summary = run(spec, out_dir, workers=workers, settings=settings)
    print(summary.manifest_path)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    config = load_config(config_path())
    setup_logging(config.logging_level)
    try:
        return _dispatch(args, config)
    except InvalidInput as exc:
        logger.error("%s", exc)
        return EXIT_SPEC
    except NumericalError as exc:
        logger.error("Numerical failure: %s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
