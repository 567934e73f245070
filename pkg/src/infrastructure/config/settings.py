"""
Runtime settings of the command line: worker count, output directory and
logging.

Only these two settings may depend on the environment; everything that
changes results lives in the experiment config.
"""

import logging
import os
import sys
from pathlib import Path

WORKERS_ENV_VAR = "FRAGWAVE_WORKERS"
DEFAULT_OUT_DIR = Path("runs")
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def resolve_workers(flag: int | None, config_value: int | None) -> int:
    """
    Resolves the worker count: --workers, then the config, then
    FRAGWAVE_WORKERS, then the number of CPUs.

    Raises:
        ValueError: If the environment variable is not a positive integer.
    """
    if flag is not None:
        return flag
    if config_value is not None:
        return config_value
    raw = os.environ.get(WORKERS_ENV_VAR)
    if raw:
        try:
            workers = int(raw)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV_VAR} must be an integer, got {raw!r}.") from None
        if workers < 1:
            raise ValueError(f"{WORKERS_ENV_VAR} must be at least 1, got {workers}.")
        return workers
    return os.cpu_count() or 1


def resolve_out_dir(flag: str | None, config_value: str | None) -> Path:
    """The output directory: --out, then output_path, then ./runs."""
    if flag:
        return Path(flag)
    if config_value:
        return Path(config_value)
    return DEFAULT_OUT_DIR


def configure_logging(level: str = "WARNING") -> None:
    """
    Configures the root logger once with a single stderr handler.

    Calling it again replaces the handler instead of adding a second one.
    """
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level.upper())
