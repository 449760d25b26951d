import logging

from rich.logging import RichHandler

PACKAGE_LOGGER = "vqsched"


def configure_logging(level: int = logging.INFO) -> logging.Logger:
    """Route the package's log records through a single rich handler."""
    logger = logging.getLogger(PACKAGE_LOGGER)
    if not any(isinstance(handler, RichHandler) for handler in logger.handlers):
        handler = RichHandler(show_path=False, rich_tracebacks=True)
        handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
        logger.addHandler(handler)
    logger.setLevel(level)
    return logger
