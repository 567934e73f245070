"""
Main entrypoint of the `fragwave` command line.

Exit codes: 0 when every check passed, 2 when a tolerance check failed,
1 on any error (written as a JSON error document to stderr).
"""

import argparse
import sys
from uuid import UUID

from src.infrastructure.adapters.entrypoints.cli.commands import (
    exponents_command,
    history_command,
    run_command,
)
from src.infrastructure.adapters.entrypoints.cli.error_handlers import handle_exception
from src.infrastructure.config.settings import configure_logging

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")
# Options whose values may start with "-", such as a grid below zero.
SIGNED_VALUE_OPTIONS = ("--p-grid",)


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value!r}")
    return number


def _nonnegative_int(value: str) -> int:
    number = int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {value!r}")
    return number


def join_signed_values(argv: list[str]) -> list[str]:
    """Rewrites `--p-grid -3:0:1` as `--p-grid=-3:0:1` so argparse does not read the value as a flag."""
    joined: list[str] = []
    tokens = iter(argv)
    for token in tokens:
        if token in SIGNED_VALUE_OPTIONS:
            value = next(tokens, None)
            joined.append(token if value is None else f"{token}={value}")
        else:
            joined.append(token)
    return joined


# --- Parser ---

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default="WARNING", type=str.upper, choices=LOG_LEVELS)

    parser = argparse.ArgumentParser(
        prog="fragwave",
        description="Monte Carlo and numerical lab for homogeneous fragmentations.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", parents=[common], help="Run one experiment config.")
    run.add_argument("--config", required=True, help="Path to the JSON experiment config.")
    run.add_argument("--out", default=None, help="Output directory (default: output_path, then ./runs).")
    run.add_argument("--seed", type=_nonnegative_int, default=None, help="Override master_seed.")
    run.add_argument("--workers", type=_positive_int, default=None, help="Worker processes.")
    run.set_defaults(handler=run_command)

    exponents = commands.add_parser("exponents", parents=[common], help="Print the exponent table of a measure.")
    exponents.add_argument("--measure", required=True, help="A kind name, inline JSON or a JSON file.")
    exponents.add_argument("--p-grid", required=True, help="start:stop:step")
    exponents.add_argument("--quadrature-nodes", type=_positive_int, default=64)
    exponents.set_defaults(handler=exponents_command)

    history = commands.add_parser("history", parents=[common], help="List stored runs.")
    history.add_argument("--kind", default=None)
    history.add_argument("--id", type=UUID, default=None, help="Show the run with this id only.")
    history.add_argument("--limit", type=_positive_int, default=20)
    history.add_argument("--offset", type=_nonnegative_int, default=0)
    history.add_argument("--out", default=None, help="Output directory holding fragwave.db.")
    history.set_defaults(handler=history_command)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(join_signed_values(argv))
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except Exception as exc:  # noqa: BLE001
        return handle_exception(exc)


if __name__ == "__main__":
    sys.exit(main())
