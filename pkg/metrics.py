"""
Error metrics: cycle-error rate, MAE of raw components and decoded angles,
cumulative error distribution and error histograms.
"""

import math
from typing import List, Sequence, Tuple

import numpy as np

from angle_core import angular_distances
from errors import InvalidInputError
from models import MetricsReport

DEFAULT_CYCLE_THRESHOLD = math.pi / 4


def cycle_error_rate(errors: Sequence[float], threshold: float = DEFAULT_CYCLE_THRESHOLD) -> float:
    """Fraction of wrapped errors whose magnitude exceeds ``threshold``"""
    if not threshold > 0:
        raise InvalidInputError(f"threshold must be positive, got {threshold}")
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise InvalidInputError("no errors to rate")
    return float(np.mean(np.abs(errors) > threshold))


def mae_components(pred: Sequence[Sequence[float]], gt: Sequence[Sequence[float]]) -> float:
    """Mean |pred - gt| over all samples and channels"""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape or pred.size == 0:
        raise InvalidInputError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    return float(np.mean(np.abs(pred - gt)))


def mae_decoded(pred: Sequence[float], gt: Sequence[float], period: float) -> float:
    """Mean period-aware angular distance, radians"""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape or pred.size == 0:
        raise InvalidInputError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    return float(np.mean(angular_distances(pred, gt, period)))


def error_cdf(errors: Sequence[float], thresholds: Sequence[float]) -> List[Tuple[float, float]]:
    """(threshold, fraction of |errors| <= threshold) per threshold"""
    thresholds = np.asarray(thresholds, dtype=float)
    if thresholds.ndim != 1 or np.any(np.diff(thresholds) < 0):
        raise InvalidInputError("thresholds must be sorted ascending")
    magnitudes = np.sort(np.abs(np.asarray(errors, dtype=float)))
    if magnitudes.size == 0:
        raise InvalidInputError("no errors to accumulate")
    counts = np.searchsorted(magnitudes, thresholds, side="right")
    return [(float(t), float(c) / magnitudes.size) for t, c in zip(thresholds, counts)]


def error_histogram(errors: Sequence[float], bin_width: float, period: float = math.pi) -> List[Tuple[float, int]]:
    """Histogram of wrapped errors with one bin centered on zero.

    Bin centers are k * bin_width for |k * bin_width| <= period / 2; counts sum to len(errors).
    """
    if not bin_width > 0:
        raise InvalidInputError(f"bin_width must be positive, got {bin_width}")
    half_bins = int(math.floor(period / 2 / bin_width + 1e-9))
    centers = bin_width * np.arange(-half_bins, half_bins + 1)
    edges = np.append(centers - bin_width / 2, centers[-1] + bin_width / 2)
    errors = np.asarray(errors, dtype=float)
    clipped = np.clip(errors, edges[0], np.nextafter(edges[-1], -np.inf))
    counts, _ = np.histogram(clipped, bins=edges)
    return [(float(c), int(n)) for c, n in zip(centers, counts)]


def metrics_report(
    pred_components: Sequence[Sequence[float]],
    gt_components: Sequence[Sequence[float]],
    pred_angles: Sequence[float],
    gt_angles: Sequence[float],
    period: float = math.pi,
    thresholds: Sequence[float] = tuple(math.radians(d) for d in (0.5, 1.0, 2.0, 5.0, 10.0, 45.0, 90.0)),
) -> MetricsReport:
    errors = angular_distances(pred_angles, gt_angles, period)
    return MetricsReport(
        mae_c=mae_components(pred_components, gt_components),
        mae_d=mae_decoded(pred_angles, gt_angles, period),
        cdf_points=tuple(error_cdf(errors, thresholds)),
    )
