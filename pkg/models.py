"""
Data models for the angle coder laboratory
"""

import math
from enum import Enum
from typing import NamedTuple, Optional, Protocol, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from angle_core import LE90, AngleDefinition, OrientedAngle

PSC_PHASES: Tuple[float, float, float] = (0.0, 2 * math.pi / 3, 4 * math.pi / 3)
# clean amplitude of the 3-phase synthesis, sqrt(9/4)
PSC_AMPLITUDE = 1.5
DEFAULT_MODULUS_FLOOR = 1e-12


class CoderKind(str, Enum):
    FSC = "fsc"
    PSC = "psc"
    PSCD = "pscd"
    CSL = "csl"


class VarianceCoder(str, Enum):
    FSC_SINGLE = "FSC_single"
    FSC_DUAL = "FSC_dual"
    PSC_SINGLE = "PSC_single"
    PSC_DUAL = "PSC_dual"


class Subcommand(str, Enum):
    ROUNDTRIP = "roundtrip"
    SWEEP = "sweep"
    MONTECARLO = "montecarlo"
    ERRORDIST = "errordist"
    LOSSCHECK = "losscheck"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class CoderSpec(BaseModel):
    """Layout of an FSC encoding: [a0, cos g, sin g, cos 2g, sin 2g, ..., cos Ng, sin Ng]"""

    model_config = ConfigDict(frozen=True)

    n_freq: int = Field(2, ge=1, description="Maximum harmonic order N")
    omega: int = Field(2, ge=1, description="Cycle mapping factor")
    definition: AngleDefinition = LE90
    include_dc: bool = True
    cyclic_wrapping: bool = True
    modulus_floor: float = Field(DEFAULT_MODULUS_FLOOR, ge=0)

    @property
    def channel_count(self) -> int:
        return 2 * self.n_freq + (1 if self.include_dc else 0)

    @property
    def dc_offset(self) -> int:
        return 1 if self.include_dc else 0

    def cos_index(self, k: int) -> int:
        return self.dc_offset + 2 * (k - 1)

    def sin_index(self, k: int) -> int:
        return self.dc_offset + 2 * (k - 1) + 1


class EncodedAngle(BaseModel):
    model_config = ConfigDict(frozen=True)

    components: Tuple[float, ...]
    spec: CoderSpec

    @model_validator(mode="after")
    def _check_length(self) -> "EncodedAngle":
        if len(self.components) != self.spec.channel_count:
            raise ValueError(
                f"expected {self.spec.channel_count} components, got {len(self.components)}"
            )
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.components, dtype=float)


class DecodeResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    theta_pred: OrientedAngle
    gamma_estimates: Tuple[float, ...] = ()
    branch_corrected: bool = False
    heuristic_fired: bool = False


class BatchDecode(NamedTuple):
    """Vectorized decode output; degenerate rows carry theta = nan"""

    theta: np.ndarray
    branch_corrected: np.ndarray
    degenerate: np.ndarray
    heuristic_fired: np.ndarray


class AngleCoder(Protocol):
    """Batch interface shared by the FSC, PSC and CSL coders"""

    @property
    def definition(self) -> AngleDefinition: ...

    @property
    def channel_count(self) -> int: ...

    def encode_batch(self, thetas: np.ndarray) -> np.ndarray: ...

    def decode_batch(self, raw: np.ndarray) -> BatchDecode: ...

    def frequency_moduli(self, raw: np.ndarray) -> np.ndarray: ...


class PscSpec(BaseModel):
    """Phase-shifting coder layout: 3 cosine channels per frequency"""

    model_config = ConfigDict(frozen=True)

    n_phase: int = Field(3, ge=3, le=3)
    phases: Tuple[float, float, float] = PSC_PHASES
    omega: int = Field(2, ge=1)
    dual_frequency: bool = False
    heuristic_threshold: Optional[float] = Field(None, gt=0)
    definition: AngleDefinition = LE90
    modulus_floor: float = Field(DEFAULT_MODULUS_FLOOR, ge=0)

    @field_validator("phases")
    @classmethod
    def _fixed_phases(cls, phases: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(abs(p - q) > 1e-15 for p, q in zip(phases, PSC_PHASES)):
            raise ValueError("PSC phases are fixed to (0, 2pi/3, 4pi/3)")
        return phases

    @property
    def frequency_count(self) -> int:
        return 2 if self.dual_frequency else 1

    @property
    def channel_count(self) -> int:
        return self.n_phase * self.frequency_count


class CslSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_bins: int = Field(45, ge=2)
    window_radius: float = Field(6, ge=0, description="Window radius in bins")
    definition: AngleDefinition = LE90

    @model_validator(mode="after")
    def _check_radius(self) -> "CslSpec":
        if not self.window_radius < self.n_bins / 2:
            raise ValueError("window_radius must be below n_bins / 2")
        return self

    @property
    def bin_width(self) -> float:
        return self.definition.period / self.n_bins


class CoderHandle(BaseModel):
    """Coder selection used by simulations and the experiment runner"""

    model_config = ConfigDict(frozen=True)

    kind: CoderKind
    n_freq: int = Field(2, ge=1)
    omega: int = Field(2, ge=1)
    threshold: Optional[float] = Field(None, gt=0)
    manifold_constrained: bool = False
    csl_bins: int = Field(45, ge=2)
    csl_window: float = Field(6, ge=0)
    cyclic_wrapping: bool = True
    definition: AngleDefinition = LE90
    modulus_floor: float = Field(DEFAULT_MODULUS_FLOOR, ge=0)

    @property
    def label(self) -> str:
        if self.kind == CoderKind.FSC:
            name = f"fsc{self.n_freq}"
        elif self.kind == CoderKind.CSL:
            name = f"csl{self.csl_bins}"
        else:
            name = self.kind.value
        return f"{name}_constrained" if self.manifold_constrained else name


class NoiseModel(BaseModel):
    """i.i.d. Gaussian channel noise on top of a modulus-scaled clean encoding"""

    model_config = ConfigDict(frozen=True)

    sigma: float = Field(0.0, ge=0, allow_inf_nan=False)
    modulus_scale: float = Field(1.0, gt=0, le=1)
    rng_seed: int = Field(0, ge=0, lt=2**64)


class SimulationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    coder: str
    trials: int = Field(..., ge=1)
    sigma: float
    modulus_scale: float
    seed: int
    variance_estimate: float = Field(..., ge=0)
    variance_all: float = Field(..., ge=0)
    mean_error: float
    mae_decoded: float = Field(..., ge=0)
    cycle_error_rate: float = Field(..., ge=0, le=1)
    cycle_threshold: float = Field(..., gt=0)
    cycle_errors: int = Field(..., ge=0)
    degenerate_count: int = Field(0, ge=0)
    histogram: Tuple[Tuple[float, int], ...] = ()
    theoretical_variance: Optional[float] = None


class MetricsReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    mae_c: float = Field(..., ge=0)
    mae_d: float = Field(..., ge=0, description="radians")
    cdf_points: Tuple[Tuple[float, float], ...] = ()

    @property
    def mae_d_deg(self) -> float:
        return math.degrees(self.mae_d)


class LossSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    beta: float = Field(1.0, gt=0)
    manifold_weight: float = Field(1.0, ge=0)
    spec: CoderSpec = Field(default_factory=CoderSpec)


class LossResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    total: float = Field(..., ge=0)
    fit_term: float = Field(..., ge=0)
    manifold_term: float = Field(..., ge=0)
    gradient: Tuple[float, ...]
    manifold_gradient: Tuple[float, ...] = ()

    def gradient_array(self) -> np.ndarray:
        return np.asarray(self.gradient, dtype=float)


class GradientCheckReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    points: int
    max_relative_error: float
    tolerance: float
    failures: Tuple[Tuple[int, int, float], ...] = Field(
        (), description="(point index, point seed, relative error)"
    )

    @property
    def passed(self) -> bool:
        return not self.failures
