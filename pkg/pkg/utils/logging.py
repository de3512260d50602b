import logging
import re
import os
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class SanitizedFormatter(logging.Formatter):
    """
    Log formatter that replaces the user's home directory with ``~``.
    """

    def __init__(self, fmt=None, datefmt=None):
        super().__init__(fmt, datefmt)
        home = os.path.expanduser('~')
        self.home_pattern = re.compile(re.escape(home)) if home and home != '/' else None

    def format(self, record):
        """Format log record with home-directory paths shortened."""
        message = super().format(record)
        if self.home_pattern is not None:
            message = self.home_pattern.sub('~', message)
        return message


def setup_secure_logging(name: str, level: int = logging.INFO) -> logging.Logger:
    """
    Set up logging for a module.

    Args:
        name: Logger name (usually __name__)
        level: Logging level

    Returns:
        Configured logging.Logger writing to stderr with the sanitized formatter
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)

    # Remove existing handlers to avoid duplicates
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    handler = logging.StreamHandler()
    handler.setFormatter(SanitizedFormatter(fmt=LOG_FORMAT))
    logger.addHandler(handler)
    logger.propagate = False

    return logger


def set_package_level(level: int) -> None:
    """Set the level of every logger under the ``pkg`` tree."""
    logging.getLogger('pkg').setLevel(level)
    for name, logger in logging.Logger.manager.loggerDict.items():
        if name.startswith('pkg.') and isinstance(logger, logging.Logger):
            logger.setLevel(level)


def sanitize_path(path: str) -> str:
    """
    Sanitize a file path for logging.

    Args:
        path: File path to sanitize

    Returns:
        Path with the home directory shown as ``~``
    """
    if not path:
        return path

    home = os.path.expanduser('~')
    if home and home != '/' and path.startswith(home):
        path = path.replace(home, '~', 1)
    return path


def log_file_operation(operation: str, filepath: str, logger: Optional[logging.Logger] = None):
    """
    Log file operations with sanitized paths.

    Args:
        operation: Operation being performed (e.g., 'reading', 'writing')
        filepath: Path to the file
        logger: Logger to use (creates one if None)
    """
    if logger is None:
        logger = logging.getLogger(__name__)

    logger.info(f"{operation.capitalize()} file: {sanitize_path(filepath)}")


def log_error_with_context(error: Exception, context: str = "", logger: Optional[logging.Logger] = None):
    """
    Log errors with context.

    Args:
        error: Exception that occurred
        context: Additional context about the error
        logger: Logger to use (creates one if None)
    """
    if logger is None:
        logger = logging.getLogger(__name__)

    error_msg = f"Error in {sanitize_path(context)}: {type(error).__name__}: {str(error)}"
    logger.error(error_msg)
