import argparse

from membrane.core.exceptions import EXIT_OK
from membrane.repositories.config_repository import ConfigRepository
from membrane.services.probe_service import instability_screen

COMMAND = "screen-instability"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(
        COMMAND, help="run a configuration and compare the growth of u - m with the Lambda^2 > sigma*eps prediction"
    )
    parser.add_argument("config", help="run configuration file")
    parser.set_defaults(handler=handle)
    return parser


def handle(args: argparse.Namespace) -> int:
    # Advisory: an inconsistent screen is logged, never turned into a failure
    screen = instability_screen(ConfigRepository().load(args.config))
    print(f"initial |u-m| = {screen.initial_deviation!r}")
    print(f"final   |u-m| = {screen.final_deviation!r}")
    print(f"predicted unstable: {screen.predicted_unstable}")
    print(f"grew: {screen.grew}")
    print(f"consistent: {screen.consistent}")
    return EXIT_OK
