from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    app_name: str = "ptyremix"

    log_level: str = "INFO"
    log_json: bool = True

    sweep_workers: int = Field(default=4, ge=1)
    simulate_workers: int = Field(default=1, ge=1)

    phase_max: float = Field(default=1.0, gt=0)
    zero_guard: float = Field(default=1e-12, gt=0)

    model_config = SettingsConfigDict(
        env_prefix="PTYREMIX_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


_settings: Settings | None = None


def get_settings() -> Settings:
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def reset_settings() -> None:
    """Drop the cached settings so the next `get_settings()` re-reads the environment."""
    global _settings
    _settings = None
