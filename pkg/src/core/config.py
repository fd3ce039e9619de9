"""
Configuration module using Pydantic BaseSettings.
Loads runtime settings from WGSPEC_* environment variables or a .env file.

Scenario parameters (cross-section, profile, tube, ...) live in the JSON
scenario config, see src/domain/schemas/config.py.
"""

from functools import lru_cache

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Runtime settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="WGSPEC_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
    )

    # Application
    app_name: str = "wgspec"
    app_version: str = "1.0.0"
    environment: str = "development"
    debug: bool = False
    log_level: str = "INFO"

    # Sweeps (band grids, L lists, epsilon lists) run on a thread pool
    max_workers: int = 4

    # Numerics
    random_seed: int = 20240521
    dense_max_dim: int = 2000

    # Reports
    default_output_dir: str = "reports"

    @field_validator("max_workers")
    @classmethod
    def check_workers(cls, v: int) -> int:
        """At least one worker."""
        return max(1, v)

    @field_validator("log_level", mode="before")
    @classmethod
    def normalize_level(cls, v):
        """Accept lower-case level names."""
        if isinstance(v, str):
            return v.upper()
        return v

    @property
    def is_production(self) -> bool:
        """Check if running in production environment."""
        return self.environment == "production"


@lru_cache
def get_settings() -> Settings:
    """
    Get cached settings instance.
    Uses lru_cache to avoid re-reading .env on every call.
    """
    return Settings()
