import logging
import sys
from typing import Optional

from .config import Config

_FORMAT = "[%(asctime)s] %(levelname)s %(name)s: %(message)s"


def _level(name: str) -> int:
    level = logging.getLevelName(str(name).upper())
    if not isinstance(level, int):
        raise ValueError(f"Unknown log level '{name}'")
    return level


def setup_logger(log_file: Optional[str] = None) -> logging.Logger:
    logger = logging.getLogger("spnkit")

    # Configure once; later calls return the same logger
    if not logger.handlers:
        level = logging.getLevelName(Config.LOG_LEVEL or "INFO")
        logger.setLevel(level if isinstance(level, int) else logging.INFO)
        formatter = logging.Formatter(_FORMAT)

        # stdout is reserved for command output
        console = logging.StreamHandler(sys.stderr)
        console.setFormatter(formatter)
        logger.addHandler(console)

        log_file = log_file or Config.LOG_FILE
        if log_file:
            file_handler = logging.FileHandler(log_file)
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)

    return logger


def set_level(name: str) -> None:
    """Change the package log level at runtime (``--log-level``)."""
    logging.getLogger("spnkit").setLevel(_level(name))


logger = setup_logger()
