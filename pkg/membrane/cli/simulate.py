import argparse
import logging

from membrane.core.exceptions import EXIT_OK, EXIT_SOLVER
from membrane.repositories.config_repository import ConfigRepository, with_override
from membrane.services.simulation_service import run_simulation

logger = logging.getLogger(__name__)

COMMAND = "simulate"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(COMMAND, help="run one simulation from a run file")
    parser.add_argument("config", help="run configuration file")
    parser.add_argument("--output-dir", help="override output.dir")
    parser.add_argument("--seed-override", type=int, help="override init.seed")
    parser.set_defaults(handler=handle)
    return parser


def handle(args: argparse.Namespace) -> int:
    config = ConfigRepository().load(args.config)
    if args.seed_override is not None:
        config = with_override(config, "init.seed", args.seed_override)
    result = run_simulation(config, args.output_dir)
    if result.failed:
        logger.error(f"Simulation stopped at step {result.failure.step}: {result.failure.detail}")
        return EXIT_SOLVER
    print(f"steps={result.steps_completed} e_total={result.energy.e_total!r} pattern={result.metrics.label}")
    return EXIT_OK
