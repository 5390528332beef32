"""
PathFlow - Core Package
Residual-network pathology pipeline: patches, network, heads, aggregation, metrics, protocol
"""

__version__ = "0.1.0"

from pathflow.core.config import Config
from pathflow.core.logger import get_logger

__all__ = [
    "Config",
    "get_logger",
]
