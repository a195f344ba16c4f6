import os
from functools import lru_cache
from pathlib import Path
from typing import Any

from dotenv import dotenv_values
from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from fxnet.errors import ConfigurationError
from fxnet.models import RunConfig

DEFAULT_CONTINENTS_PATH = Path(__file__).resolve().parent / "data" / "continents.csv"


class Settings(BaseSettings):
    app_name: str = Field(default="fxnet currency network service", alias="FXNET_APP_NAME")
    environment: str = Field(default="development", alias="FXNET_ENVIRONMENT")
    log_level: str = Field(default="INFO", alias="FXNET_LOG_LEVEL")

    jobs_dir: str = Field(default="/tmp/fxnet_jobs", alias="FXNET_JOBS_DIR")
    continents_path: str = Field(default=str(DEFAULT_CONTINENTS_PATH), alias="FXNET_CONTINENTS")
    workers: int = Field(default_factory=lambda: os.cpu_count() or 1, alias="FXNET_WORKERS")
    max_upload_bytes: int = Field(default=50 * 1024 * 1024, alias="FXNET_MAX_UPLOAD_BYTES")

    allowed_origins: list[str] = Field(
        default=[
            "http://localhost:3000",
            "http://localhost:8000",
            "http://127.0.0.1:8000",
        ],
        alias="FXNET_ALLOWED_ORIGINS",
    )

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()


def read_config_file(path: str | Path) -> dict[str, str]:
    """Read a ``key = value`` run configuration file. Keys are case-insensitive."""
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigurationError(f"Config file not found: {config_path}")
    values = dotenv_values(config_path, encoding="utf-8")
    return {key.strip().lower().replace("-", "_"): value for key, value in values.items() if value is not None}


def load_run_config(
    config_path: str | Path | None = None,
    overrides: dict[str, Any] | None = None,
    settings: Settings | None = None,
) -> RunConfig:
    """Build a RunConfig from defaults < config file < explicit overrides (CLI flags)."""
    settings = settings or get_settings()
    merged: dict[str, Any] = {
        "continents": settings.continents_path,
        "jobs": settings.workers,
    }
    if config_path is not None:
        merged.update(read_config_file(config_path))
    merged.update({key: value for key, value in (overrides or {}).items() if value is not None})

    try:
        return RunConfig.model_validate(merged)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in err['loc']) or 'config'}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigurationError(f"Invalid run configuration: {problems}") from exc
