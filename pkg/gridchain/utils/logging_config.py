"""
Logging setup for the gridchain command line and tool servers
"""

import logging

from rich.logging import RichHandler

from gridchain.utils.config import get_settings

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

_configured = False


def setup_logging(level: str | None = None) -> None:
    """Configure the root logger once; later calls only adjust the level"""
    global _configured
    settings = get_settings()
    resolved = (level or settings.log_level).upper()

    if _configured:
        logging.getLogger().setLevel(resolved)
        return

    if settings.rich_logging:
        handler: logging.Handler = RichHandler(
            show_path=False, rich_tracebacks=True, markup=False
        )
        # RichHandler prints its own timestamp and level columns
        handler.setFormatter(logging.Formatter("%(name)s - %(message)s"))
    else:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))

    logging.basicConfig(level=resolved, handlers=[handler], force=True)
    _configured = True
