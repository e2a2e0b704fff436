import argparse
import logging

from membrane.core.exceptions import EXIT_OK, EXIT_SOLVER
from membrane.repositories.config_repository import ConfigRepository
from membrane.services.sweep_service import run_sweep

logger = logging.getLogger(__name__)

COMMAND = "sweep"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(COMMAND, help="run a parameter sweep from a sweep file")
    parser.add_argument("config", help="sweep configuration file")
    parser.add_argument("--output-dir", help="override the sweep directory")
    parser.add_argument("--workers", type=int, help="override sweep.workers")
    parser.set_defaults(handler=handle)
    return parser


def handle(args: argparse.Namespace) -> int:
    sweep = ConfigRepository().load_sweep(args.config)
    result = run_sweep(sweep, args.output_dir, args.workers)
    for cell in result.cells:
        label = cell.metrics.get("label", "-")
        print(f"{cell.name} {cell.values} {cell.status} {label}")
    if result.failed_cells:
        logger.warning(f"{len(result.failed_cells)} sweep cell(s) failed")
        return EXIT_SOLVER
    return EXIT_OK
