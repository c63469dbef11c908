"""Top-level argument parser combining every subcommand."""
import argparse
import sys

from app.cli.commands import bench, gradcheck, optimize, simulate
from app.cli.common import EXIT_INVALID


class PulseArgumentParser(argparse.ArgumentParser):
    """Usage errors are validation failures (exit 1), not check failures."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> PulseArgumentParser:
    parser = PulseArgumentParser(
        prog="pulse",
        description="Exact-gradient optimal control for single spin-1/2 pulses.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=PulseArgumentParser)
    for command in (optimize, simulate, gradcheck, bench):
        command.register(subparsers)
    return parser
