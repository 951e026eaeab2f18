"""
Fourier Series Coder: orthogonal harmonic encoding of an oriented angle and
dual-frequency decoding with cyclic wrapping.

Layout of an encoding with N harmonics and the DC channel::

    [a0, cos g, sin g, cos 2g, sin 2g, ..., cos Ng, sin Ng]    g = omega * theta

Decoding reads harmonics 1 and 2 only; higher harmonics are supervision-only.
"""

import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from angle_core import AngleDefinition, OrientedAngle, wrap_to_range, wrap_values
from errors import DegenerateModulusError, InvalidInputError
from models import BatchDecode, CoderSpec, DecodeResult, EncodedAngle

logger = structlog.get_logger(__name__)

RawComponents = Union[Sequence[float], np.ndarray]

TWO_PI = 2 * math.pi


def dc_target(spec: CoderSpec) -> float:
    """Ground-truth value of the a0 channel.

    Unit-amplitude harmonics average to zero over one period, so the anchor is 0
    for every harmonic order.
    """
    return 0.0


def encode_batch(thetas: np.ndarray, spec: CoderSpec) -> np.ndarray:
    """Encode an array of angles into an (n, channel_count) component matrix"""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    harmonics = np.arange(1, spec.n_freq + 1)
    phases = (spec.omega * thetas)[:, None] * harmonics[None, :]

    out = np.empty((thetas.shape[0], spec.channel_count))
    off = spec.dc_offset
    if spec.include_dc:
        out[:, 0] = dc_target(spec)
    out[:, off::2] = np.cos(phases)
    out[:, off + 1::2] = np.sin(phases)
    return out


def encode(theta: OrientedAngle, spec: CoderSpec) -> EncodedAngle:
    if theta.definition != spec.definition:
        theta = wrap_to_range(theta.value, spec.definition)
    row = encode_batch(np.array([theta.value]), spec)[0]
    return EncodedAngle(components=tuple(float(c) for c in row), spec=spec)


def decode_single(c: float, s: float, k: int, omega: int) -> float:
    """Principal phase of c + js divided by k*omega, in (-pi/(k*omega), pi/(k*omega)]"""
    if c == 0 and s == 0:
        raise DegenerateModulusError(0.0, 0.0, frequency=k)
    return math.atan2(s, c) / (k * omega)


def cyclic_wrap(phi1: np.ndarray, half_phase2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Pick the half-period of the fine estimate that agrees with the coarse phase.

    ``phi1`` is the fundamental phase in (-pi, pi]; ``half_phase2`` is half the
    second-harmonic phase, i.e. the expanded angle modulo pi. When the two
    disagree by an obtuse angle the fine estimate is moved by pi.
    Returns the expanded-angle estimate and the mask of corrected rows.
    """
    corrected = np.cos(phi1 - half_phase2) < 0
    gamma = np.where(corrected, np.mod(half_phase2, TWO_PI) - math.pi, half_phase2)
    return gamma, corrected


def _as_matrix(raw: RawComponents, channels: int) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        raw = raw[None, :]
    if raw.ndim != 2 or raw.shape[1] != channels:
        raise InvalidInputError(f"expected {channels} channels, got shape {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise InvalidInputError("raw components must be finite")
    return raw


def frequency_moduli(raw: RawComponents, spec: CoderSpec) -> np.ndarray:
    """(n, N) matrix of per-harmonic Cartesian moduli"""
    raw = _as_matrix(raw, spec.channel_count)
    off = spec.dc_offset
    return np.hypot(raw[:, off::2], raw[:, off + 1::2])


def per_frequency_modulus(raw: RawComponents, spec: CoderSpec) -> np.ndarray:
    """sqrt(cos_k^2 + sin_k^2) for k = 1..N; the collapse diagnostic"""
    return frequency_moduli(raw, spec)[0]


def _uses_wrapping(spec: CoderSpec) -> bool:
    return spec.n_freq >= 2 and spec.cyclic_wrapping


def _phase_estimates(raw: np.ndarray, spec: CoderSpec) -> Tuple[np.ndarray, Optional[np.ndarray], np.ndarray]:
    c1, s1 = raw[:, spec.cos_index(1)], raw[:, spec.sin_index(1)]
    phi1 = np.arctan2(s1, c1)
    if not _uses_wrapping(spec):
        return phi1, None, np.hypot(c1, s1)
    c2, s2 = raw[:, spec.cos_index(2)], raw[:, spec.sin_index(2)]
    half2 = 0.5 * np.arctan2(s2, c2)
    return phi1, half2, np.hypot(c2, s2)


def decode_batch(raw: RawComponents, spec: CoderSpec) -> BatchDecode:
    raw = _as_matrix(raw, spec.channel_count)
    phi1, half2, modulus = _phase_estimates(raw, spec)
    degenerate = (modulus < spec.modulus_floor) | (modulus == 0)

    if half2 is None:
        gamma = phi1
        corrected = np.zeros(raw.shape[0], dtype=bool)
    else:
        gamma, corrected = cyclic_wrap(phi1, half2)

    theta = wrap_values(np.where(degenerate, 0.0, gamma / spec.omega), spec.definition)
    theta = np.where(degenerate, np.nan, theta)
    corrected = corrected & ~degenerate
    return BatchDecode(
        theta=theta,
        branch_corrected=corrected,
        degenerate=degenerate,
        heuristic_fired=np.zeros(raw.shape[0], dtype=bool),
    )


def decode(raw: RawComponents, spec: CoderSpec) -> DecodeResult:
    """Decode one raw prediction; the DC channel is ignored"""
    matrix = _as_matrix(raw, spec.channel_count)
    if matrix.shape[0] != 1:
        raise InvalidInputError("decode takes a single prediction; use decode_batch")
    phi1, half2, modulus = _phase_estimates(matrix, spec)
    used_frequency = 2 if half2 is not None else 1
    if modulus[0] < spec.modulus_floor or modulus[0] == 0:
        raise DegenerateModulusError(float(modulus[0]), spec.modulus_floor, used_frequency)

    batch = decode_batch(matrix, spec)
    estimates = (float(phi1[0]),) if half2 is None else (float(phi1[0]), float(half2[0]))
    return DecodeResult(
        theta_pred=OrientedAngle(value=float(batch.theta[0]), definition=spec.definition),
        gamma_estimates=estimates,
        branch_corrected=bool(batch.branch_corrected[0]),
    )


class FourierSeriesCoder:
    """Batch coder bound to one CoderSpec"""

    def __init__(self, spec: CoderSpec):
        self.spec = spec

    @property
    def definition(self) -> AngleDefinition:
        return self.spec.definition

    @property
    def channel_count(self) -> int:
        return self.spec.channel_count

    def encode(self, theta: OrientedAngle) -> EncodedAngle:
        return encode(theta, self.spec)

    def decode(self, raw: RawComponents) -> DecodeResult:
        return decode(raw, self.spec)

    def encode_batch(self, thetas: np.ndarray) -> np.ndarray:
        return encode_batch(thetas, self.spec)

    def decode_batch(self, raw: np.ndarray) -> BatchDecode:
        return decode_batch(raw, self.spec)

    def frequency_moduli(self, raw: np.ndarray) -> np.ndarray:
        return frequency_moduli(raw, self.spec)
