"""
Configuration management for the angle coder laboratory
"""

from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from angle_core import ANGLE_DEFINITIONS
from errors import InvalidInputError
from models import DEFAULT_MODULUS_FLOOR, CoderKind, OutputFormat, Subcommand


class LabSettings(BaseSettings):
    """Process-wide defaults, overridable through FSC_* environment variables"""

    model_config = SettingsConfigDict(env_prefix="FSC_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    seed: int = Field(0, ge=0, lt=2**64)
    trials: int = Field(10_000, ge=1)
    workers: int = Field(1, ge=1)
    modulus_floor: float = Field(DEFAULT_MODULUS_FLOOR, ge=0)
    output_format: OutputFormat = OutputFormat.CSV
    csl_bins: int = Field(45, ge=2)


class ExperimentConfig(BaseModel):
    """One CLI invocation. Angles are degrees here and radians everywhere else."""

    model_config = ConfigDict(extra="forbid")

    subcommand: Subcommand
    coder: CoderKind = CoderKind.FSC
    n_freq: int = Field(2, ge=1, le=64)
    omega: int = Field(2, ge=1)
    definition: str = "le90"
    cyclic_wrapping: bool = True
    sigma: float = Field(0.0, ge=0, allow_inf_nan=False)
    modulus: float = Field(1.0, gt=0, le=1)
    trials: int = Field(10_000, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    workers: int = Field(1, ge=1)
    angle_step_deg: float = Field(1.0, gt=0, le=180)
    angle_deg: Optional[float] = Field(None, allow_inf_nan=False, description="Fixed ground truth; unset sweeps uniformly")
    threshold: Optional[float] = Field(None, gt=0, description="PSC heuristic threshold on normalized modulus")
    modulus_floor: float = Field(DEFAULT_MODULUS_FLOOR, ge=0)
    csl_bins: int = Field(45, ge=2)
    csl_window: float = Field(6.0, ge=0)
    modulus_start: float = Field(1.0, gt=0, le=1)
    modulus_stop: float = Field(0.1, gt=0, le=1)
    modulus_step: float = Field(0.05, gt=0)
    compare: List[CoderKind] = Field(default_factory=lambda: [CoderKind.FSC, CoderKind.PSCD])
    constrained: Optional[List[CoderKind]] = None
    hist_bin_deg: float = Field(2.0, gt=0, le=90)
    cdf_step_deg: float = Field(0.5, gt=0, le=90)
    points: int = Field(1000, ge=1)
    beta: float = Field(1.0, gt=0)
    manifold_weight: float = Field(1.0, ge=0)
    inject_fault: bool = False
    out_path: Optional[Path] = None
    format: OutputFormat = OutputFormat.CSV

    @field_validator("compare", "constrained", mode="before")
    @classmethod
    def _split_list(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @field_validator("definition")
    @classmethod
    def _known_definition(cls, value: str) -> str:
        if value not in ANGLE_DEFINITIONS:
            raise ValueError(f"unknown angle definition {value!r}, expected one of {sorted(ANGLE_DEFINITIONS)}")
        return value

    @model_validator(mode="after")
    def _check_coder_combination(self) -> "ExperimentConfig":
        if CoderKind.CSL in self.coders_in_use() and not self.csl_window < self.csl_bins / 2:
            raise ValueError(f"csl_window ({self.csl_window}) must be below csl_bins / 2 ({self.csl_bins / 2})")
        if self.subcommand == Subcommand.MONTECARLO and self.constrained:
            # constrained coders stay at m = 1
            raise ValueError("montecarlo sweeps the modulus; constrained coders are only compared in errordist")
        return self

    def coders_in_use(self) -> List[CoderKind]:
        if self.subcommand == Subcommand.ERRORDIST:
            return list(self.compare)
        return [self.coder]

    def constrained_kinds(self) -> List[CoderKind]:
        """Coders held on the unit manifold; errordist constrains FSC unless told otherwise"""
        if self.constrained is not None:
            return list(self.constrained)
        return [CoderKind.FSC] if self.subcommand == Subcommand.ERRORDIST else []


def load_config_file(path: Path) -> Dict[str, str]:
    """Flat key=value file; dashes in keys are accepted for flag-style names"""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    values = dotenv_values(path)
    return {key.strip().lower().replace("-", "_"): value for key, value in values.items() if value is not None}


def build_experiment_config(
    subcommand: Subcommand,
    flags: Optional[Dict[str, Any]] = None,
    config_file: Optional[Path] = None,
    settings: Optional[LabSettings] = None,
) -> ExperimentConfig:
    """Merge settings defaults < config file < explicit flags"""
    settings = settings or config
    merged: Dict[str, Any] = {
        "seed": settings.seed,
        "trials": settings.trials,
        "workers": settings.workers,
        "modulus_floor": settings.modulus_floor,
        "format": settings.output_format,
        "csl_bins": settings.csl_bins,
    }
    if config_file is not None:
        merged.update(load_config_file(config_file))
    merged.update({k: v for k, v in (flags or {}).items() if v is not None})
    merged["subcommand"] = subcommand
    try:
        return ExperimentConfig(**merged)
    except ValidationError as e:
        raise InvalidInputError(str(e)) from e


# Global config instance
config = LabSettings()
