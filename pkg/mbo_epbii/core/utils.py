"""
Utility functions shared by the optimizer, the services and the CLI.
"""

import logging
import os
import sys
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from dotenv import load_dotenv


def load_environment(env_path: Optional[Union[str, Path]] = None) -> None:
    """Load environment variables from a .env file (current directory by default)."""
    if env_path is None:
        env_path = os.path.join(os.getcwd(), ".env")
    load_dotenv(env_path)
    logger = logging.getLogger(__name__)
    logger.debug(f"Loaded environment from: {env_path}")


def setup_logging(level: str = "INFO") -> None:
    """Setup application logging configuration."""
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[
            logging.StreamHandler(sys.stdout)
        ]
    )


def log_error(error: Exception, context: str = "") -> None:
    """Log an error with context information."""
    logger = logging.getLogger(__name__)
    logger.error(f"Error in {context}: {str(error)}", exc_info=True)


class Stream(IntEnum):
    """Identifiers of the independent random streams derived from a master seed."""

    LHS = 1
    LIKELIHOOD_GA = 2
    NSGA3 = 3
    EXTREME_GA = 4
    KMEANS = 5
    MC_BLOCK = 6
    MOEAD = 7
    SELECTION = 8
    FALLBACK = 9


def component_seed(master_seed: int, *keys: int) -> np.random.SeedSequence:
    """Derive a reproducible seed sequence for one component.

    The same (master_seed, keys) always gives the same stream, so any component
    can be replayed on its own.
    """
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in keys))


def component_rng(master_seed: int, *keys: int) -> np.random.Generator:
    """Generator for `component_seed(master_seed, *keys)`."""
    return np.random.default_rng(component_seed(master_seed, *keys))


def rng_to_int(rng: np.random.Generator) -> int:
    """Draw a 31-bit integer seed for libraries that only accept integers."""
    return int(rng.integers(0, 2**31 - 1))


def format_number(value: float) -> str:
    """Locale-independent numeric formatting used in every CSV and table."""
    if value is None:
        return ""
    value = float(value)
    if np.isnan(value):
        return "nan"
    if np.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


def write_matrix_csv(path: Union[str, Path], rows: np.ndarray,
                     extra_columns: Optional[Sequence[Iterable]] = None) -> None:
    """Write a numeric matrix as headerless CSV with '.' decimals."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for i, row in enumerate(rows):
            cells = [format_number(v) for v in row]
            if extra_columns is not None:
                cells.extend(str(column[i]) for column in extra_columns)
            handle.write(",".join(cells) + "\n")


def read_matrix_csv(path: Union[str, Path]) -> np.ndarray:
    """Read a headerless numeric CSV written by `write_matrix_csv`."""
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float, ndmin=2))
