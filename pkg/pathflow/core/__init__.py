"""Core module initialization"""

from pathflow.core.config import Config
from pathflow.core.logger import get_logger, RunLogger
from pathflow.core.seeding import derive_seed, slide_seed, make_rng
from pathflow.core.exceptions import (
    PathflowException,
    ConfigurationError,
    DataError,
    NumericError,
)

__all__ = [
    "Config",
    "get_logger",
    "RunLogger",
    "derive_seed",
    "slide_seed",
    "make_rng",
    "PathflowException",
    "ConfigurationError",
    "DataError",
    "NumericError",
]
