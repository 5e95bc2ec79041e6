import logging
import sys
from typing import Optional

from pythonjsonlogger import jsonlogger

from src.config import Settings, get_settings


LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
JSON_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"


def configure_logging(settings: Optional[Settings] = None) -> None:
    """Install a single stderr handler on the root logger.

    Text output by default; structured JSON records when ``log_json`` is set.
    Calling it twice replaces the handler instead of stacking a second one.
    """
    settings = settings or get_settings()

    handler = logging.StreamHandler(sys.stderr)
    if settings.log_json:
        handler.setFormatter(jsonlogger.JsonFormatter(JSON_FORMAT))
    else:
        handler.setFormatter(logging.Formatter(LOG_FORMAT))

    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(settings.log_level.upper())
