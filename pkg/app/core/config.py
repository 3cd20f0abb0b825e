import os
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict

PROJECT_PATH = os.path.abspath(os.path.join(os.path.dirname(__file__), '../..'))


class Settings(BaseSettings):
    PROJECT_NAME: str = "constrained-potential-games"
    PROJECT_VERSION: str = "0.1.0"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    # Guard for dense enumeration of joint pure profiles.
    MAX_PROFILES: int = 10_000_000

    OUTPUT_DIR: str = "runs"
    SWEEP_WORKERS: int = 1

    # Run registry; left unset, runs are only written to disk.
    DATABASE_URL: Optional[str] = None

    model_config = SettingsConfigDict(
        env_file=os.path.join(PROJECT_PATH, ".env"),
        env_prefix="CPG_",
        extra="ignore",
    )


settings = Settings()
