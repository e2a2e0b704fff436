import argparse
import logging
import sys
from typing import List, Optional

from membrane.cli import commands
from membrane.core.config import settings
from membrane.core.exceptions import EXIT_CONFIG
from membrane.core.middleware import error_handling, request_logging

logger = logging.getLogger(__name__)


def configure_logging(level: Optional[str] = None) -> None:
    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


class CommandParser(argparse.ArgumentParser):
    """Usage errors are configuration errors, not solver failures."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = CommandParser(
        prog="membrane",
        description=f"{settings.app_name} {settings.app_version}",
    )
    parser.add_argument("--log-level", help="logging level (default from MEMBRANE_LOG_LEVEL)")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in commands:
        command.register(subparsers)
    return parser


@error_handling
@request_logging
def dispatch(args: argparse.Namespace) -> int:
    return args.handler(args)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
