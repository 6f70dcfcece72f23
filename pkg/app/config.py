"""Configuration management using pydantic-settings."""
from pathlib import Path
from typing import Any, Mapping, Optional

from dotenv import dotenv_values
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Toolkit settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="CALIBFREE_",
        case_sensitive=False,
        extra="ignore",
    )

    # Application Settings
    app_env: str = "development"
    log_level: str = "INFO"

    # Single-view tracker
    n_init: int = Field(3, ge=1)
    max_age: int = Field(30, ge=1)
    gallery_size: int = Field(100, ge=1)
    cosine_gate: float = Field(0.4, ge=-1.0, le=1.0)
    motion_gate: float = Field(9.4877, gt=0.0)
    max_detections: int = Field(10, ge=1)

    # Cross-view association
    merge_threshold: float = Field(0.5, ge=-1.0, le=1.0)
    bank_threshold: float = Field(0.6, ge=-1.0, le=1.0)

    # Evaluation
    iou_threshold: float = Field(0.5, gt=0.0, le=1.0)

    # Objective
    mask_ratio: float = Field(0.75, ge=0.0, lt=1.0)
    nmi_bins: int = Field(8, ge=2)
    w_sep: float = Field(1.0, ge=0.0)
    w_distill: float = Field(1.0, ge=0.0)
    w_recon: float = Field(1.0, ge=0.0)

    # Toy trainer
    embed_dim: int = Field(32, ge=2)
    decoder_dim: int = Field(16, ge=1)
    teacher_dim: int = Field(16, ge=1)
    lr: float = Field(0.2, ge=0.0)
    epochs: int = Field(50, ge=0)
    batch_frames: int = Field(1, ge=1)
    norm_pix_loss: bool = True
    seed: int = 7


def load_settings(
    config_path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> Settings:
    """
    Build settings with precedence: overrides > config file > environment > defaults.

    Args:
        config_path: Optional key=value file
        overrides: Values given explicitly (e.g. command-line flags); None entries are ignored

    Returns:
        Validated Settings instance
    """
    values: dict[str, Any] = {}
    if config_path is not None:
        if not Path(config_path).is_file():
            raise FileNotFoundError(f"config file not found: {config_path}")
        file_values = dotenv_values(config_path)
        values.update({k.lower().replace("-", "_"): v for k, v in file_values.items() if v is not None})
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return Settings(**values)


# Global settings instance
settings = Settings()
