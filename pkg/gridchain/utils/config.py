"""
Process Settings
Environment-driven settings for gridchain, loaded from GRIDCHAIN_* variables
and an optional .env file
"""

import logging
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)

# Load environment variables
load_dotenv()


class GridSettings(BaseSettings):
    """Runtime knobs that do not belong in a scenario config"""

    model_config = SettingsConfigDict(
        env_prefix="GRIDCHAIN_",
        env_file=".env",
        extra="ignore",
    )

    log_level: str = "INFO"
    rich_logging: bool = True
    # Above this total flexibility the optimizer switches to the greedy fallback
    flex_exact_limit_wh: int = Field(default=1_000_000, gt=0)
    default_seed: int = Field(default=0, ge=0)


@lru_cache(maxsize=1)
def get_settings() -> GridSettings:
    """Return the process-wide settings, read once"""
    settings = GridSettings()
    logger.debug(f"Settings loaded: {settings.model_dump()}")
    return settings
