from functools import lru_cache
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application settings with environment variable support."""


    app_name: str = "NB Profile Fit"
    app_version: str = "1.0.0"
    debug: bool = False


    log_level: str = "INFO"
    log_json: bool = False


    nu_max: float = 1e4
    epsilon: float = 1e-3
    delta: float = 0.1
    max_iter: int = 500
    grad_tol: float = 1e-8


    boot_reps: int = 1000
    level: float = 0.05
    workers: int = 1
    oracle_points: int = 4000

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        env_prefix = "NBFIT_"


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
