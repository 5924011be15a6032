"""
Configuration management for the hierarchical tensor solver toolkit.
Uses pydantic-settings for type-safe configuration loading.
"""
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # Logging
    log_level: str = Field(default="INFO", description="Console log level")
    log_dir: str = Field(default="logs", description="Directory for rotated log files")

    # Dense oracles
    dense_cap: int = Field(default=2**24, description="Max entries materialized by to_dense/from_dense")
    dense_solve_cap: int = Field(default=2**16, description="Max unknowns for the sparse direct solve")

    # Numerics
    max_iter: int = Field(default=10000, description="Default iteration cap for solvers")
    expsum_terms: int = Field(default=100, description="Default quadrature term count J")

    # Sweeps
    sweep_workers: int = Field(default=4, description="Worker processes for the sweep subcommand")

    model_config = SettingsConfigDict(
        env_prefix="HTSOLVE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )


# Global settings instance
_settings: Settings | None = None


def get_settings() -> Settings:
    """
    Get the global settings instance.
    Loads from environment variables on first call.
    """
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings
