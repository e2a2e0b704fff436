import argparse

from membrane.core.exceptions import EXIT_OK
from membrane.repositories.config_repository import ConfigRepository
from membrane.repositories.diagnostics_repository import DiagnosticsRepository
from membrane.services.probe_service import continuous_dependence_probe

COMMAND = "probe-dependence"
DEFAULT_DELTAS = "1e-2,1e-3"


def _deltas(text: str):
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(COMMAND, help="measure continuous dependence on the initial data")
    parser.add_argument("config", help="run configuration file")
    parser.add_argument("--deltas", type=_deltas, default=_deltas(DEFAULT_DELTAS), help="perturbation sizes")
    parser.add_argument("--output-dir", help="write dependence.csv here")
    parser.set_defaults(handler=handle)
    return parser


def handle(args: argparse.Namespace) -> int:
    config = ConfigRepository().load(args.config)
    table = continuous_dependence_probe(config, args.deltas)
    rows = [row.model_dump() for row in table.rows]
    for row in rows:
        print(f"delta={row['delta']!r} D={row['distance']!r} D/delta^2={row['ratio']!r}")
    if args.output_dir:
        DiagnosticsRepository(args.output_dir).write_table(["delta", "distance", "ratio"], rows, "dependence.csv")
    return EXIT_OK
