"""
Structured logging system for PathFlow
Console output plus an optional rotating log file
"""

import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Dict, Optional

CONSOLE_FORMAT = '%(levelname)s | %(message)s'
FILE_FORMAT = '%(asctime)s | %(name)s | %(levelname)s | %(message)s'
FILE_DATEFMT = '%Y-%m-%d %H:%M:%S'
MB = 1024 * 1024


def _console_handler(level: int) -> logging.Handler:
    handler = logging.StreamHandler()
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))
    return handler


def _file_handler(log_file: str, max_bytes: int, backup_count: int) -> logging.Handler:
    """DEBUG and up, rotated at max_bytes"""
    Path(log_file).parent.mkdir(parents=True, exist_ok=True)
    handler = RotatingFileHandler(log_file, maxBytes=max_bytes, backupCount=backup_count)
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt=FILE_DATEFMT))
    return handler


class PathflowLogger:
    """Registry of configured named loggers"""

    _loggers: Dict[str, logging.Logger] = {}

    @classmethod
    def get_logger(cls, name: str, log_file: Optional[str] = None, level: str = "INFO",
                   max_bytes: int = 10 * MB, backup_count: int = 5) -> logging.Logger:
        """
        Named logger, configured once and cached

        Args:
            name: Module name
            log_file: Rotating log file, or None for console only
            level: DEBUG, INFO, WARNING, ERROR or CRITICAL
            max_bytes: Rotation size of the log file
            backup_count: Rotated files kept
        """
        cached = cls._loggers.get(name)
        if cached is not None:
            return cached

        logger = logging.getLogger(name)
        logger.setLevel(getattr(logging, level.upper(), logging.INFO))
        logger.propagate = False
        if not logger.handlers:
            logger.addHandler(_console_handler(logger.level))
            if log_file:
                logger.addHandler(_file_handler(log_file, max_bytes, backup_count))

        cls._loggers[name] = logger
        return logger


def get_logger(name: str, log_file: Optional[str] = None) -> logging.Logger:
    """
    Logger set up from the `logging` config section

    Args:
        name: Logger name
        log_file: Overrides `logging.file_path`
    """
    from pathflow.core.config import Config

    config = Config()
    return PathflowLogger.get_logger(
        name,
        log_file if log_file is not None else config.get("logging.file_path"),
        level=str(config.get("logging.level", "INFO")),
        max_bytes=int(config.get("logging.max_log_size_mb", 10)) * MB,
        backup_count=int(config.get("logging.backup_count", 5)),
    )


class RunLogger:
    """
    Audit trail of CLI runs
    One line per subcommand with its outcome
    """

    def __init__(self, log_file: Optional[str] = None):
        self.logger = get_logger("pathflow.runs", log_file)

    def log_run(self, command: str, details: dict, success: bool = True):
        """
        Log a subcommand outcome

        Args:
            command: Subcommand name (e.g., 'train', 'synth')
            details: Dictionary with run details
            success: Whether the run succeeded
        """
        status = "SUCCESS" if success else "FAILED"
        message = f"[{command}] {status} | {details}"

        if success:
            self.logger.info(message)
        else:
            self.logger.error(message)
