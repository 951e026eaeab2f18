"""
Baseline angle coders: Phase-Shifting Coder (PSC, single frequency), its
dual-frequency variant (PSCD, optional modulus threshold) and Circular Smooth
Label (CSL) classification.
"""

import math
from typing import Optional, Sequence, Tuple

import numpy as np
import structlog

from angle_core import AngleDefinition, OrientedAngle, wrap_to_range, wrap_values
from errors import DegenerateModulusError, InvalidInputError
from fsc_coder import RawComponents, cyclic_wrap
from models import PSC_AMPLITUDE, BatchDecode, CslSpec, DecodeResult, PscSpec

logger = structlog.get_logger(__name__)

TWO_PI = 2 * math.pi


# ---------------------------------------------------------------------------
# Phase-Shifting Coder
# ---------------------------------------------------------------------------

def _second_phases(spec: PscSpec) -> np.ndarray:
    return np.mod(2 * np.asarray(spec.phases), TWO_PI)


def psc_encode_batch(thetas: np.ndarray, spec: PscSpec) -> np.ndarray:
    """cos(omega*theta + a_k), then cos(2*omega*theta + 2*a_k) when dual"""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    alphas = np.asarray(spec.phases)
    gamma = (spec.omega * thetas)[:, None]
    patterns = [np.cos(gamma + alphas[None, :])]
    if spec.dual_frequency:
        patterns.append(np.cos(2 * gamma + 2 * alphas[None, :]))
    return np.concatenate(patterns, axis=1)


def psc_encode(theta: OrientedAngle, spec: PscSpec) -> np.ndarray:
    if theta.definition != spec.definition:
        theta = wrap_to_range(theta.value, spec.definition)
    return psc_encode_batch(np.array([theta.value]), spec)[0]


def synthesize_batch(patterns: np.ndarray, alphas: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Row-wise Cartesian synthesis C = sum P cos a, S = -sum P sin a"""
    patterns = np.asarray(patterns, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    return patterns @ np.cos(alphas), -(patterns @ np.sin(alphas))


def psc_synthesize(p: Sequence[float], alphas: Sequence[float]) -> Tuple[float, float]:
    """Cartesian synthesis of one 3-phase pattern; clean inputs give C^2 + S^2 = 9/4"""
    p = np.asarray(p, dtype=float)
    if p.shape != (3,) or len(alphas) != 3:
        raise InvalidInputError("PSC synthesis takes exactly 3 phase samples")
    c, s = synthesize_batch(p[None, :], np.asarray(alphas))
    return float(c[0]), float(s[0])


def _psc_matrix(raw: RawComponents, spec: PscSpec) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        raw = raw[None, :]
    if raw.ndim != 2 or raw.shape[1] != spec.channel_count:
        raise InvalidInputError(f"expected {spec.channel_count} channels, got shape {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise InvalidInputError("raw components must be finite")
    return raw


def psc_frequency_moduli(raw: RawComponents, spec: PscSpec) -> np.ndarray:
    """(n, F) synthesized moduli normalized by the clean amplitude 1.5"""
    raw = _psc_matrix(raw, spec)
    c1, s1 = synthesize_batch(raw[:, 0:3], spec.phases)
    moduli = [np.hypot(c1, s1)]
    if spec.dual_frequency:
        c2, s2 = synthesize_batch(raw[:, 3:6], _second_phases(spec))
        moduli.append(np.hypot(c2, s2))
    return np.stack(moduli, axis=1) / PSC_AMPLITUDE


def _psc_phases(raw: np.ndarray, spec: PscSpec) -> Tuple[np.ndarray, Optional[np.ndarray], np.ndarray]:
    c1, s1 = synthesize_batch(raw[:, 0:3], spec.phases)
    phi1 = np.arctan2(s1, c1)
    if not spec.dual_frequency:
        return phi1, None, np.hypot(c1, s1)
    c2, s2 = synthesize_batch(raw[:, 3:6], _second_phases(spec))
    return phi1, 0.5 * np.arctan2(s2, c2), np.hypot(c2, s2)


def psc_decode_batch(raw: RawComponents, spec: PscSpec) -> BatchDecode:
    raw = _psc_matrix(raw, spec)
    phi1, half2, modulus = _psc_phases(raw, spec)

    if half2 is None:
        gamma = phi1
        corrected = np.zeros(raw.shape[0], dtype=bool)
    else:
        gamma, corrected = cyclic_wrap(phi1, half2)

    if spec.heuristic_threshold is not None:
        fired = modulus / PSC_AMPLITUDE < spec.heuristic_threshold
    else:
        fired = np.zeros(raw.shape[0], dtype=bool)
    degenerate = ~fired & ((modulus < spec.modulus_floor) | (modulus == 0))

    gamma = np.where(fired | degenerate, 0.0, gamma)
    theta = wrap_values(gamma / spec.omega, spec.definition)
    theta = np.where(degenerate, np.nan, theta)
    return BatchDecode(
        theta=theta,
        branch_corrected=corrected & ~fired & ~degenerate,
        degenerate=degenerate,
        heuristic_fired=fired,
    )


def psc_decode(raw: RawComponents, spec: PscSpec) -> DecodeResult:
    matrix = _psc_matrix(raw, spec)
    if matrix.shape[0] != 1:
        raise InvalidInputError("psc_decode takes a single prediction; use psc_decode_batch")
    phi1, half2, modulus = _psc_phases(matrix, spec)
    batch = psc_decode_batch(matrix, spec)
    if batch.degenerate[0]:
        raise DegenerateModulusError(float(modulus[0]), spec.modulus_floor, spec.frequency_count)
    if batch.heuristic_fired[0]:
        logger.debug("psc_heuristic_fired", modulus=float(modulus[0]) / PSC_AMPLITUDE,
                     threshold=spec.heuristic_threshold)

    estimates = (float(phi1[0]),) if half2 is None else (float(phi1[0]), float(half2[0]))
    return DecodeResult(
        theta_pred=OrientedAngle(value=float(batch.theta[0]), definition=spec.definition),
        gamma_estimates=estimates,
        branch_corrected=bool(batch.branch_corrected[0]),
        heuristic_fired=bool(batch.heuristic_fired[0]),
    )


class PhaseShiftingCoder:
    def __init__(self, spec: PscSpec):
        self.spec = spec

    @property
    def definition(self) -> AngleDefinition:
        return self.spec.definition

    @property
    def channel_count(self) -> int:
        return self.spec.channel_count

    def encode_batch(self, thetas: np.ndarray) -> np.ndarray:
        return psc_encode_batch(thetas, self.spec)

    def decode_batch(self, raw: np.ndarray) -> BatchDecode:
        return psc_decode_batch(raw, self.spec)

    def frequency_moduli(self, raw: np.ndarray) -> np.ndarray:
        return psc_frequency_moduli(raw, self.spec)


# ---------------------------------------------------------------------------
# Circular Smooth Label
# ---------------------------------------------------------------------------

def _bin_indices(thetas: np.ndarray, spec: CslSpec) -> np.ndarray:
    offsets = wrap_values(thetas, spec.definition) - spec.definition.lower_bound
    return np.clip(np.floor(offsets / spec.bin_width).astype(int), 0, spec.n_bins - 1)


def csl_encode_batch(thetas: np.ndarray, spec: CslSpec) -> np.ndarray:
    """Gaussian window (sigma = radius/3) around the target bin, truncated at the radius"""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    centers = _bin_indices(thetas, spec)
    bins = np.arange(spec.n_bins)
    gap = np.abs(bins[None, :] - centers[:, None])
    distance = np.minimum(gap, spec.n_bins - gap)
    if spec.window_radius == 0:
        return (distance == 0).astype(float)
    width = spec.window_radius / 3
    labels = np.exp(-(distance ** 2) / (2 * width ** 2))
    return np.where(distance <= spec.window_radius, labels, 0.0)


def csl_encode(theta: OrientedAngle, spec: CslSpec) -> np.ndarray:
    return csl_encode_batch(np.array([theta.value]), spec)[0]


def _csl_matrix(scores: RawComponents, spec: CslSpec) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    if scores.ndim == 1:
        scores = scores[None, :]
    if scores.size == 0 or scores.ndim != 2 or scores.shape[1] != spec.n_bins:
        raise InvalidInputError(f"expected {spec.n_bins} scores, got shape {scores.shape}")
    if np.any(np.isnan(scores)):
        raise InvalidInputError("scores contain NaN")
    return scores


def csl_decode_batch(scores: RawComponents, spec: CslSpec) -> BatchDecode:
    scores = _csl_matrix(scores, spec)
    # argmax returns the first maximum, so ties go to the lowest bin
    winners = np.argmax(scores, axis=1)
    centers = spec.definition.lower_bound + (winners + 0.5) * spec.bin_width
    n = scores.shape[0]
    return BatchDecode(
        theta=wrap_values(centers, spec.definition),
        branch_corrected=np.zeros(n, dtype=bool),
        degenerate=np.zeros(n, dtype=bool),
        heuristic_fired=np.zeros(n, dtype=bool),
    )


def csl_decode(scores: RawComponents, spec: CslSpec) -> OrientedAngle:
    """Center of the highest-scoring bin"""
    matrix = _csl_matrix(scores, spec)
    if matrix.shape[0] != 1:
        raise InvalidInputError("csl_decode takes a single score vector")
    return OrientedAngle(value=float(csl_decode_batch(matrix, spec).theta[0]),
                         definition=spec.definition)


class CircularSmoothLabelCoder:
    def __init__(self, spec: CslSpec):
        self.spec = spec

    @property
    def definition(self) -> AngleDefinition:
        return self.spec.definition

    @property
    def channel_count(self) -> int:
        return self.spec.n_bins

    def encode_batch(self, thetas: np.ndarray) -> np.ndarray:
        return csl_encode_batch(thetas, self.spec)

    def decode_batch(self, raw: np.ndarray) -> BatchDecode:
        return csl_decode_batch(raw, self.spec)

    def frequency_moduli(self, raw: np.ndarray) -> np.ndarray:
        # no Cartesian pair to measure
        return np.empty((np.atleast_2d(raw).shape[0], 0))
