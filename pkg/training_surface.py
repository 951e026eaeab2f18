"""
Training surface of the coders: logit normalization, smooth-L1 target fitting
with the per-frequency manifold constraint, exact gradients, and a central
finite-difference oracle to check them.
"""

import math
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np
import structlog

from angle_core import OrientedAngle, angle_grid, wrap_to_range
from baseline_coders import psc_encode
from errors import InvalidInputError
from fsc_coder import encode
from models import PSC_AMPLITUDE, GradientCheckReport, LossResult, LossSpec, PscSpec

logger = structlog.get_logger(__name__)

GradientFn = Callable[[np.ndarray, OrientedAngle, LossSpec], np.ndarray]


class LossWeights(NamedTuple):
    box: float
    angle: float


# weights of the box and angle terms in a detector's total loss; not trained here
LOSS_WEIGHTS: Dict[str, LossWeights] = {
    "default": LossWeights(box=1.0, angle=0.2),
    "hrsc": LossWeights(box=0.7, angle=0.6),
}


def normalize_logits(raw: Sequence[float]) -> np.ndarray:
    """2 * sigmoid(x) - 1, written as tanh(x / 2) to stay stable for large |x|"""
    return np.tanh(np.asarray(raw, dtype=float) / 2)


def smooth_l1(x: float, target: float, beta: float = 1.0) -> float:
    if not beta > 0:
        raise InvalidInputError(f"beta must be positive, got {beta}")
    d = abs(x - target)
    return 0.5 * d * d / beta if d < beta else d - 0.5 * beta


def smooth_l1_grad(x: float, target: float, beta: float = 1.0) -> float:
    """d smooth_l1 / dx; the kink d == beta takes the quadratic branch"""
    if not beta > 0:
        raise InvalidInputError(f"beta must be positive, got {beta}")
    diff = x - target
    return diff / beta if abs(diff) <= beta else math.copysign(1.0, diff)


def _smooth_l1_values(diff: np.ndarray, beta: float) -> np.ndarray:
    d = np.abs(diff)
    return np.where(d < beta, 0.5 * d * d / beta, d - 0.5 * beta)


def _smooth_l1_slopes(diff: np.ndarray, beta: float) -> np.ndarray:
    return np.where(np.abs(diff) <= beta, diff / beta, np.sign(diff))


def _check_n_pos(n_pos: float) -> None:
    if not n_pos > 0:
        raise InvalidInputError(f"n_pos must be positive, got {n_pos}")


def fsc_loss(pred: Sequence[float], gt_angle: OrientedAngle, spec: LossSpec,
             n_pos: float = 1.0) -> LossResult:
    """Target fitting over every channel plus the unit-modulus penalty per harmonic.

    ``n_pos`` divides every term (the detector's positive-sample count).
    """
    _check_n_pos(n_pos)
    coder = spec.spec
    pred = np.asarray(pred, dtype=float)
    if pred.shape != (coder.channel_count,):
        raise InvalidInputError(f"expected {coder.channel_count} channels, got shape {pred.shape}")

    residual = pred - encode(gt_angle, coder).as_array()
    fit = float(np.sum(_smooth_l1_values(residual, spec.beta)))
    fit_grad = _smooth_l1_slopes(residual, spec.beta)

    off = coder.dc_offset
    c, s = pred[off::2], pred[off + 1::2]
    excess = c * c + s * s - 1
    manifold = float(np.sum(_smooth_l1_values(excess, spec.beta)))
    slope = _smooth_l1_slopes(excess, spec.beta)
    manifold_grad = np.zeros_like(pred)
    manifold_grad[off::2] = 2 * c * slope
    manifold_grad[off + 1::2] = 2 * s * slope

    w = spec.manifold_weight
    return LossResult(
        total=(fit + w * manifold) / n_pos,
        fit_term=fit / n_pos,
        manifold_term=manifold / n_pos,
        gradient=tuple((fit_grad + w * manifold_grad) / n_pos),
        manifold_gradient=tuple(manifold_grad / n_pos),
    )


def psc_loss(pred: Sequence[float], gt_angle: OrientedAngle, spec: PscSpec, beta: float = 1.0,
             manifold_weight: float = 1.0, n_pos: float = 1.0) -> LossResult:
    """PSC target fitting plus a penalty pulling (C^2 + S^2) / (9/4) toward 1 per frequency"""
    _check_n_pos(n_pos)
    if not beta > 0 or manifold_weight < 0:
        raise InvalidInputError("beta must be positive and manifold_weight non-negative")
    pred = np.asarray(pred, dtype=float)
    if pred.shape != (spec.channel_count,):
        raise InvalidInputError(f"expected {spec.channel_count} channels, got shape {pred.shape}")

    residual = pred - psc_encode(gt_angle, spec)
    fit = float(np.sum(_smooth_l1_values(residual, beta)))
    fit_grad = _smooth_l1_slopes(residual, beta)

    manifold = 0.0
    manifold_grad = np.zeros_like(pred)
    alphas = np.asarray(spec.phases)
    for f in range(spec.frequency_count):
        phases = np.mod((f + 1) * alphas, 2 * math.pi)
        block = pred[3 * f:3 * f + 3]
        c = float(block @ np.cos(phases))
        s = -float(block @ np.sin(phases))
        excess = (c * c + s * s) / PSC_AMPLITUDE ** 2 - 1
        manifold += smooth_l1(excess, 0.0, beta)
        dq = (2 * c * np.cos(phases) - 2 * s * np.sin(phases)) / PSC_AMPLITUDE ** 2
        manifold_grad[3 * f:3 * f + 3] = smooth_l1_grad(excess, 0.0, beta) * dq

    return LossResult(
        total=(fit + manifold_weight * manifold) / n_pos,
        fit_term=fit / n_pos,
        manifold_term=manifold / n_pos,
        gradient=tuple((fit_grad + manifold_weight * manifold_grad) / n_pos),
        manifold_gradient=tuple(manifold_grad / n_pos),
    )


def finite_diff_grad(f: Callable[[np.ndarray], float], x: Sequence[float], h: float = 1e-6) -> np.ndarray:
    """Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate"""
    if not h > 0:
        raise InvalidInputError(f"h must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        grad[i] = (f(x + step) - f(x - step)) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), 1e-8)
    return float(np.max(np.abs(analytic - numeric))) / scale


def _analytic_gradient(pred: np.ndarray, theta: OrientedAngle, spec: LossSpec) -> np.ndarray:
    return fsc_loss(pred, theta, spec).gradient_array()


def _near_kink(pred: np.ndarray, theta: OrientedAngle, spec: LossSpec, margin: float) -> bool:
    coder = spec.spec
    residual = np.abs(pred - encode(theta, coder).as_array())
    off = coder.dc_offset
    excess = np.abs(pred[off::2] ** 2 + pred[off + 1::2] ** 2 - 1)
    gaps = np.abs(np.concatenate([residual, excess]) - spec.beta)
    return bool(np.any(gaps < margin))


def gradient_check(
    spec: LossSpec,
    points: int = 1000,
    seed: int = 0,
    h: float = 1e-6,
    tolerance: float = 1e-6,
    kink_margin: float = 1e-3,
    gradient_fn: Optional[GradientFn] = None,
) -> GradientCheckReport:
    """Compare the analytic fsc_loss gradient with central differences at random points.

    Point i draws from ``default_rng([seed, i])`` and is redrawn while any smooth-L1
    argument sits within ``kink_margin`` of beta.
    """
    gradient_fn = gradient_fn or _analytic_gradient
    definition = spec.spec.definition
    worst = 0.0
    failures: List = []

    for i in range(points):
        rng = np.random.default_rng([seed, i])
        while True:
            pred = rng.uniform(-1.5, 1.5, spec.spec.channel_count)
            theta = wrap_to_range(rng.uniform(definition.lower_bound, definition.upper_bound), definition)
            if not _near_kink(pred, theta, spec, kink_margin):
                break
        numeric = finite_diff_grad(lambda v: fsc_loss(v, theta, spec).total, pred, h)
        err = relative_error(gradient_fn(pred, theta, spec), numeric)
        worst = max(worst, err)
        if err >= tolerance:
            failures.append((i, seed, err))

    report = GradientCheckReport(points=points, max_relative_error=worst, tolerance=tolerance,
                                 failures=tuple(failures))
    logger.info("gradient_check_complete", points=points, max_relative_error=worst,
                failures=len(failures))
    return report


def zero_at_truth(spec: LossSpec, step: float = math.radians(1.0)) -> float:
    """Largest loss total over a sweep of ground-truth angles fed their own encoding"""
    definition = spec.spec.definition
    worst = 0.0
    for value in angle_grid(definition, step):
        theta = wrap_to_range(float(value), definition)
        worst = max(worst, fsc_loss(encode(theta, spec.spec).as_array(), theta, spec).total)
    return worst


def manifold_pull(spec: LossSpec, theta: OrientedAngle, scale: float) -> float:
    """d manifold_term / d scale at pred = scale * encode(theta); negative below scale 1"""
    if not 0 < scale:
        raise InvalidInputError(f"scale must be positive, got {scale}")
    clean = encode(theta, spec.spec).as_array()
    result = fsc_loss(scale * clean, theta, spec)
    return float(np.dot(result.manifold_gradient, clean))
