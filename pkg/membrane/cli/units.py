import argparse

from membrane.core.exceptions import EXIT_OK
from membrane.repositories.config_repository import ConfigRepository
from membrane.services.diagnostics import coupling_instability
from membrane.services.units import physical_units

COMMAND = "units"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(COMMAND, help="print the parameters of a run file in physical units")
    parser.add_argument("config", help="run configuration file")
    parser.set_defaults(handler=handle)
    return parser


def handle(args: argparse.Namespace) -> int:
    params = ConfigRepository().load(args.config).model_params()
    for name, value, unit in physical_units(params).rows():
        print(f"{name:8s} {value} {unit}")
    print(f"coupling instability (Lambda^2 > sigma*eps): {coupling_instability(params)}")
    return EXIT_OK
