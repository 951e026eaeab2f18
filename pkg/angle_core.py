"""
Angle definitions, range wrapping and period-aware angular distance.

All angles are radians. Ranges are half-open, ``[lower_bound, lower_bound + period)``,
so the upper endpoint maps onto the lower one.
"""

import math
from typing import Any, Dict, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from errors import InvalidInputError

logger = structlog.get_logger(__name__)

ArrayLike = Union[float, np.ndarray]


class AngleDefinition(BaseModel):
    """Range contract of an oriented angle"""

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1, description="Identifier, e.g. le90")
    lower_bound: float = Field(..., allow_inf_nan=False)
    period: float = Field(..., gt=0, allow_inf_nan=False)

    @property
    def upper_bound(self) -> float:
        return self.lower_bound + self.period


LE90 = AngleDefinition(name="le90", lower_bound=-math.pi / 2, period=math.pi)
LE135 = AngleDefinition(name="le135", lower_bound=-math.pi / 4, period=math.pi)
OC = AngleDefinition(name="oc", lower_bound=0.0, period=math.pi / 2)

ANGLE_DEFINITIONS: Dict[str, AngleDefinition] = {d.name: d for d in (LE90, LE135, OC)}


def _wrap_scalar(value: float, lower_bound: float, period: float) -> float:
    offset = (value - lower_bound) % period
    if offset >= period:
        offset = 0.0
    wrapped = lower_bound + offset
    # lower_bound + offset can round up onto the excluded endpoint
    if wrapped >= lower_bound + period:
        wrapped = lower_bound
    return wrapped


class OrientedAngle(BaseModel):
    """A scalar angle bound to an angle definition; wrapped into range on construction"""

    model_config = ConfigDict(frozen=True)

    value: float = Field(..., allow_inf_nan=False)
    definition: AngleDefinition = LE90

    @model_validator(mode="before")
    @classmethod
    def _wrap_into_range(cls, data: Any) -> Any:
        if not isinstance(data, dict) or "value" not in data:
            return data
        definition = data.get("definition", LE90)
        if isinstance(definition, dict):
            definition = AngleDefinition(**definition)
        value = data["value"]
        if isinstance(value, (int, float)) and math.isfinite(value):
            data = {**data, "definition": definition,
                    "value": _wrap_scalar(float(value), definition.lower_bound, definition.period)}
        return data

    @property
    def degrees(self) -> float:
        return math.degrees(self.value)


def wrap_to_range(value: float, definition: AngleDefinition = LE90) -> OrientedAngle:
    """Map ``value`` onto the congruent angle inside the definition's range"""
    if not math.isfinite(value):
        raise InvalidInputError(f"cannot wrap non-finite angle {value!r}")
    try:
        return OrientedAngle(value=value, definition=definition)
    except ValidationError as e:
        raise InvalidInputError(str(e)) from e


def angular_distance(a: float, b: float, period: float) -> float:
    """Smallest |a - b + k*period| over integer k; lies in [0, period/2]"""
    if not period > 0:
        raise InvalidInputError(f"period must be positive, got {period}")
    d = (a - b) % period
    return min(d, period - d)


def to_expanded(theta: OrientedAngle, omega: int) -> float:
    """Scale an angle into the coder's 2*pi cycle: gamma = omega * theta"""
    return omega * theta.value


def from_expanded(gamma: float, omega: int, definition: AngleDefinition = LE90) -> OrientedAngle:
    """Inverse of ``to_expanded``: gamma / omega wrapped into the definition's range"""
    if omega < 1:
        raise InvalidInputError(f"omega must be >= 1, got {omega}")
    return wrap_to_range(gamma / omega, definition)


# Vectorized forms used by the batch coders and the simulations


def wrap_values(values: ArrayLike, definition: AngleDefinition = LE90) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("cannot wrap non-finite angles")
    lo, period = definition.lower_bound, definition.period
    offset = np.mod(values - lo, period)
    offset = np.where(offset >= period, 0.0, offset)
    wrapped = lo + offset
    return np.where(wrapped >= lo + period, lo, wrapped)


def angular_distances(a: ArrayLike, b: ArrayLike, period: float) -> np.ndarray:
    if not period > 0:
        raise InvalidInputError(f"period must be positive, got {period}")
    d = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), period)
    return np.minimum(d, period - d)


def signed_errors(pred: ArrayLike, truth: ArrayLike, period: float) -> np.ndarray:
    """pred - truth wrapped to (-period/2, period/2]"""
    if not period > 0:
        raise InvalidInputError(f"period must be positive, got {period}")
    half = period / 2
    raw = np.asarray(pred, dtype=float) - np.asarray(truth, dtype=float)
    return half - np.mod(half - raw, period)


def angle_grid(definition: AngleDefinition, step: float) -> np.ndarray:
    """Angles lower_bound + i*step covering the range once; ceil(period/step) points"""
    if not step > 0:
        raise InvalidInputError(f"step must be positive, got {step}")
    count = int(math.ceil(definition.period / step - 1e-9))
    grid = definition.lower_bound + step * np.arange(count)
    logger.debug("angle_grid", definition=definition.name, step=step, points=count)
    return grid
