from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import dotenv_values
from pydantic_settings import BaseSettings, SettingsConfigDict

from errors import StorageError


class Settings(BaseSettings):
    # Oracle truncation
    dim: int = 30
    multimode_max_dim: int = 32
    trace_budget: float = 1e-10
    multimode_trace_budget: float = 1e-3
    kraus_tail_budget: float = 1e-16
    state_tail_budget: float = 1e-10
    sld_tolerance: float = 1e-12

    # Verification
    seed: int = 42
    draws: int = 200
    dominance_tolerance: float = 1e-9
    identity_tolerance: float = 1e-10
    dual_path_tolerance: float = 1e-8
    max_concurrency: int = 4
    multimode_dim: int = 25

    # Output
    golden_path: str = "./golden"
    log_level: str = "INFO"

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="QFI_BOUND_",
        case_sensitive=False,
        extra="ignore",
    )


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    """Read a flat `key = value` file; keys use CLI flag names"""
    if not path:
        return {}

    config_path = Path(path)
    if not config_path.is_file():
        raise StorageError(f"Config file not found: {config_path}")

    values = dotenv_values(config_path)
    return {
        key.strip().lstrip("-").replace("-", "_"): value
        for key, value in values.items()
        if value is not None
    }


settings = Settings()
