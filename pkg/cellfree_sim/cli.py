"""Command-line interface: run, validate and dump-layout."""

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import ValidationError

from . import __version__
from .association import dump_graph
from .channel import dump_channel_fixture
from .config import Estimator, Scheme, SimConfig, field_names, load_config
from .core import FIGURE_NAMES, ExperimentPlan, build_layout, draw_estimates, figure_plan, run_experiment, validate_plan
from .errors import SimulationError
from .geometry import dump_layout
from .utils import validate_output_dir

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2

LOG_FORMAT = "%(levelname)s - %(module)s - %(message)s"


def _csv_list(kind: type) -> Any:
    def parse(text: str) -> list:
        return [kind(item.strip()) for item in text.split(",") if item.strip()]
    return parse


def _pairs(text: str) -> list[tuple[int, int]]:
    """Parse "10:64,20:32" into [(10, 64), (20, 32)]."""
    pairs = []
    for item in filter(None, (part.strip() for part in text.split(","))):
        try:
            L, M = item.split(":")
            pairs.append((int(L), int(M)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"Expected L:M pairs, got {item!r}")
    return pairs


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("scenario", "Override any config field")
    group.add_argument("--config", type=Path, help="Flat key=value config file")
    for name in field_names():
        group.add_argument(f"--{name.replace('_', '-')}", dest=name, metavar=name.upper())


def _add_plan_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("experiment")
    group.add_argument("--name", default=None, help="Prefix of the output files")
    group.add_argument("--figure", choices=FIGURE_NAMES, help="Start from a predefined figure plan")
    group.add_argument("--pilot-dims", type=_csv_list(int), help="Sweep of τ_p, e.g. 10,20,40")
    group.add_argument("--ue-counts", type=_csv_list(int), help="Sweep of K")
    group.add_argument("--ru-antenna-pairs", type=_pairs, help="Sweep of L:M pairs")
    group.add_argument("--schemes", type=_csv_list(str), help=f"Any of {', '.join(s.value for s in Scheme)}")
    group.add_argument("--estimators", type=_csv_list(str), help=f"Any of {', '.join(e.value for e in Estimator)}")
    group.add_argument("--fixed-antenna-budget", action="store_true", default=None)
    group.add_argument("--output-dir", type=Path)
    group.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cellfree-sim", description="Cell-free user-centric MU-MIMO simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run an experiment and write CSV/JSON reports")
    _add_config_arguments(run)
    _add_plan_arguments(run)

    validate = sub.add_parser("validate", help="Check a configuration and plan without running")
    _add_config_arguments(validate)
    _add_plan_arguments(validate)

    dump = sub.add_parser("dump-layout", help="Write one layout, its clusters and a channel draw")
    _add_config_arguments(dump)
    dump.add_argument("--layout-index", type=int, default=0)
    dump.add_argument("--output-dir", type=Path, default=Path("."))
    dump.add_argument("--with-channels", action="store_true", help="Also write a channel fixture of draw 0")
    return parser


def configure_logging(level: str) -> None:
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger("cellfree_sim")
    root.handlers[:] = [handler]
    root.setLevel(level)


def config_from_args(args: argparse.Namespace) -> SimConfig:
    overrides = {name: getattr(args, name, None) for name in field_names()}
    return load_config(args.config, **overrides)


def plan_from_args(args: argparse.Namespace, base: SimConfig) -> ExperimentPlan:
    """Figure plan or default plan, with explicit flags taking precedence."""
    plan = figure_plan(args.figure, base) if args.figure else ExperimentPlan(base=base)
    updates = {
        "name": args.name,
        "pilot_dims": args.pilot_dims,
        "ue_counts": args.ue_counts,
        "ru_antenna_pairs": args.ru_antenna_pairs,
        "schemes": args.schemes,
        "estimators": args.estimators,
        "fixed_antenna_budget": args.fixed_antenna_budget,
        "output_dir": args.output_dir,
        "workers": args.workers,
    }
    values = plan.model_dump()
    values.update({k: v for k, v in updates.items() if v is not None})
    return ExperimentPlan.model_validate(values)


def _report_invalid(messages: Sequence[str]) -> int:
    for message in messages:
        print(f"invalid: {message}", file=sys.stderr)
    return EXIT_INVALID


def _validation_messages(e: ValidationError) -> list[str]:
    return [
        f"{'.'.join(map(str, err['loc'])) or 'config'}: {str(err['msg']).removeprefix('Value error, ')}"
        for err in e.errors()
    ]


def cmd_run(args: argparse.Namespace, base: SimConfig) -> int:
    plan = plan_from_args(args, base)
    is_valid, diagnostics = validate_plan(plan)
    if not is_valid:
        return _report_invalid(diagnostics)
    for path in asyncio.run(run_experiment(plan)):
        print(path)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace, base: SimConfig) -> int:
    plan = plan_from_args(args, base)
    is_valid, diagnostics = validate_plan(plan)
    if not is_valid:
        return _report_invalid(diagnostics)
    print(f"ok: {len(plan.point_updates())} sweep point(s)")
    return EXIT_OK


def cmd_dump_layout(args: argparse.Namespace, base: SimConfig) -> int:
    output_dir = Path(args.output_dir)
    is_valid, error_msg = validate_output_dir(output_dir)
    if not is_valid:
        return _report_invalid([error_msg])
    if not 0 <= args.layout_index < base.num_layouts:
        return _report_invalid([f"layout index {args.layout_index} not in [0, {base.num_layouts})"])

    state = build_layout(base, args.layout_index)
    stem = f"layout_{args.layout_index:03d}"
    paths = [
        dump_layout(state.layout, output_dir / f"{stem}_nodes.csv"),
        dump_graph(state.graph, output_dir / f"{stem}_clusters.csv"),
    ]
    if args.with_channels:
        channels, _ = draw_estimates(state, base, [Estimator.IDEAL], 0)
        paths.append(dump_channel_fixture(state.lsfc, state.supports, channels, output_dir / f"{stem}_channels.csv"))
    for path in paths:
        print(path)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "validate": cmd_validate, "dump-layout": cmd_dump_layout}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the cellfree-sim console script."""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    try:
        base = config_from_args(args)
        return COMMANDS[args.command](args, base)
    except ValidationError as e:
        return _report_invalid(_validation_messages(e))
    except (ValueError, FileNotFoundError) as e:
        return _report_invalid([str(e)])
    except (SimulationError, OSError) as e:
        logger.error("Simulation failed: %s", e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
