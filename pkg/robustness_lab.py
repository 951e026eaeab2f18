"""
Noise-robustness laboratory: closed-form variance laws, the first-order
arctan2 error model, and Monte Carlo simulation of decoding under Gaussian
channel noise and simulated modulus collapse.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import ValidationError

from angle_core import OrientedAngle, signed_errors
from baseline_coders import CircularSmoothLabelCoder, PhaseShiftingCoder
from errors import InvalidInputError
from fsc_coder import FourierSeriesCoder
from metrics import cycle_error_rate, error_histogram
from models import (
    AngleCoder,
    CoderHandle,
    CoderKind,
    CoderSpec,
    CslSpec,
    NoiseModel,
    PscSpec,
    SimulationReport,
    VarianceCoder,
)
from noise import BLOCK_TRIALS, perturb_batch

logger = structlog.get_logger(__name__)

UNIFORM_SWEEP = "uniform-sweep"
SWEEP_ANGLES = 360
SHARD_TRIALS = 16 * BLOCK_TRIALS
DEFAULT_HISTOGRAM_BIN = math.radians(2.0)

GroundTruth = Union[OrientedAngle, str]

# Var(d theta) = factor * sigma^2 at unit modulus
_VARIANCE_FACTORS: Dict[VarianceCoder, float] = {
    VarianceCoder.FSC_SINGLE: 1 / 4,
    VarianceCoder.FSC_DUAL: 1 / 16,
    VarianceCoder.PSC_SINGLE: 1 / 6,
    VarianceCoder.PSC_DUAL: 1 / 24,
}


def build_coder(handle: CoderHandle) -> AngleCoder:
    try:
        return _build_coder(handle)
    except ValidationError as e:
        raise InvalidInputError(f"invalid {handle.kind.value} coder: {e}") from e


def _build_coder(handle: CoderHandle) -> AngleCoder:
    if handle.kind == CoderKind.FSC:
        return FourierSeriesCoder(CoderSpec(
            n_freq=handle.n_freq,
            omega=handle.omega,
            definition=handle.definition,
            cyclic_wrapping=handle.cyclic_wrapping,
            modulus_floor=handle.modulus_floor,
        ))
    if handle.kind in (CoderKind.PSC, CoderKind.PSCD):
        return PhaseShiftingCoder(PscSpec(
            omega=handle.omega,
            dual_frequency=handle.kind == CoderKind.PSCD,
            heuristic_threshold=handle.threshold,
            definition=handle.definition,
            modulus_floor=handle.modulus_floor,
        ))
    return CircularSmoothLabelCoder(CslSpec(
        n_bins=handle.csl_bins, window_radius=handle.csl_window, definition=handle.definition
    ))


def variance_coder_for(handle: CoderHandle) -> Optional[VarianceCoder]:
    """Closed-form family of a coder, None when no closed form applies"""
    if handle.kind == CoderKind.FSC:
        dual = handle.n_freq >= 2 and handle.cyclic_wrapping
        return VarianceCoder.FSC_DUAL if dual else VarianceCoder.FSC_SINGLE
    if handle.kind == CoderKind.PSCD:
        return VarianceCoder.PSC_DUAL
    if handle.kind == CoderKind.PSC:
        return VarianceCoder.PSC_SINGLE
    return None


def effective_modulus(handle: CoderHandle, modulus_scale: float) -> float:
    """Constrained coders are held on the unit manifold by their training term"""
    return 1.0 if handle.manifold_constrained else modulus_scale


def taylor_error(s: float, c: float, eps_s: float, eps_c: float) -> float:
    """First-order arctan2 deviation eps_s*c - eps_c*s on the unit circle"""
    if abs(c * c + s * s - 1) > 1e-9:
        raise InvalidInputError(f"(c, s) = ({c}, {s}) is not on the unit circle")
    return eps_s * c - eps_c * s


def theoretical_variance(coder: VarianceCoder, sigma: float) -> float:
    """Small-noise variance of the decoded angle at unit modulus"""
    if sigma < 0:
        raise InvalidInputError(f"sigma must be >= 0, got {sigma}")
    return _VARIANCE_FACTORS[VarianceCoder(coder)] * sigma ** 2


def _trial_angles(coder: AngleCoder, theta_gt: GroundTruth, start: int, stop: int) -> np.ndarray:
    if isinstance(theta_gt, OrientedAngle):
        return np.full(stop - start, theta_gt.value)
    definition = coder.definition
    grid = definition.lower_bound + definition.period / SWEEP_ANGLES * np.arange(SWEEP_ANGLES)
    return grid[np.arange(start, stop) % SWEEP_ANGLES]


def _simulate_shard(coder: AngleCoder, theta_gt: GroundTruth, model: NoiseModel,
                    start: int, stop: int) -> Tuple[np.ndarray, np.ndarray]:
    thetas = _trial_angles(coder, theta_gt, start, stop)
    noisy = perturb_batch(coder.encode_batch(thetas), model, start=start)
    decoded = coder.decode_batch(noisy)
    period = coder.definition.period
    errors = signed_errors(np.where(decoded.degenerate, thetas, decoded.theta), thetas, period)
    # a degenerate decode counts as the worst branch error
    errors = np.where(decoded.degenerate, period / 2, errors)
    return errors, decoded.degenerate


def simulate_errors(coder: AngleCoder, theta_gt: GroundTruth, model: NoiseModel, trials: int,
                    workers: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Signed wrapped decode errors and degenerate mask for trials [0, trials).

    Shards are whole noise blocks, so the result does not depend on ``workers``.
    """
    if trials < 1:
        raise InvalidInputError(f"trials must be >= 1, got {trials}")
    if isinstance(theta_gt, str) and theta_gt != UNIFORM_SWEEP:
        raise InvalidInputError(f"unknown ground truth mode {theta_gt!r}")
    shards = [(lo, min(lo + SHARD_TRIALS, trials)) for lo in range(0, trials, SHARD_TRIALS)]

    def run(shard: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
        return _simulate_shard(coder, theta_gt, model, *shard)

    if workers > 1 and len(shards) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, shards))
    else:
        parts = [run(shard) for shard in shards]
    errors = np.concatenate([p[0] for p in parts])
    degenerate = np.concatenate([p[1] for p in parts])
    return errors, degenerate


def monte_carlo_variance(
    handle: CoderHandle,
    theta_gt: GroundTruth,
    model: NoiseModel,
    trials: int,
    cycle_threshold: Optional[float] = None,
    histogram_bin: float = DEFAULT_HISTOGRAM_BIN,
    workers: int = 1,
) -> SimulationReport:
    """Perturb, decode and summarize ``trials`` noisy encodings.

    Errors beyond ``cycle_threshold`` (default a quarter period) are cycle errors:
    they are counted in the rate and the histogram but excluded from
    ``variance_estimate``; ``variance_all`` keeps every trial.
    """
    coder = build_coder(handle)
    period = coder.definition.period
    threshold = period / 4 if cycle_threshold is None else cycle_threshold
    m = effective_modulus(handle, model.modulus_scale)
    effective = model if m == model.modulus_scale else model.model_copy(update={"modulus_scale": m})

    errors, degenerate = simulate_errors(coder, theta_gt, effective, trials, workers=workers)
    inliers = (np.abs(errors) <= threshold) & ~degenerate
    variance_all = float(np.var(errors))
    variance = float(np.var(errors[inliers])) if inliers.any() else variance_all

    family = variance_coder_for(handle)
    theory = theoretical_variance(family, effective.sigma) if family is not None and m == 1.0 else None
    rate = cycle_error_rate(errors, threshold)

    report = SimulationReport(
        coder=handle.label,
        trials=trials,
        sigma=effective.sigma,
        modulus_scale=m,
        seed=effective.rng_seed,
        variance_estimate=variance,
        variance_all=variance_all,
        mean_error=float(np.mean(errors)),
        mae_decoded=float(np.mean(np.abs(errors))),
        cycle_error_rate=rate,
        cycle_threshold=threshold,
        cycle_errors=int(np.count_nonzero(np.abs(errors) > threshold)),
        degenerate_count=int(np.count_nonzero(degenerate)),
        histogram=tuple(error_histogram(errors, histogram_bin, period)),
        theoretical_variance=theory,
    )
    logger.info("monte_carlo_complete", coder=report.coder, trials=trials, sigma=report.sigma,
                modulus=m, variance=variance, cycle_error_rate=rate)
    return report


def modulus_grid(start: float = 1.0, stop: float = 0.1, step: float = 0.05) -> List[float]:
    """Descending modulus values start, start - step, ..., down to stop inclusive"""
    if not (0 < stop <= start <= 1) or not step > 0:
        raise InvalidInputError(f"bad modulus grid {start} -> {stop} step {step}")
    count = int(math.floor((start - stop) / step + 1e-9)) + 1
    return [round(start - i * step, 12) for i in range(count)]


def modulus_sweep(handle: CoderHandle, theta_gt: GroundTruth, sigma: float, moduli: Iterable[float],
                  trials: int, seed: int, workers: int = 1) -> List[SimulationReport]:
    """One Monte Carlo report per modulus, all drawing the same noise stream"""
    return [
        monte_carlo_variance(handle, theta_gt, NoiseModel(sigma=sigma, modulus_scale=m, rng_seed=seed),
                             trials, workers=workers)
        for m in moduli
    ]


def collapse_comparison(handles: Sequence[CoderHandle], sigma: float, modulus_scale: float,
                        trials: int, seed: int, theta_gt: GroundTruth = UNIFORM_SWEEP,
                        workers: int = 1) -> Dict[str, SimulationReport]:
    """High-noise error distributions under identical seeds, keyed by coder label"""
    model = NoiseModel(sigma=sigma, modulus_scale=modulus_scale, rng_seed=seed)
    return {
        handle.label: monte_carlo_variance(handle, theta_gt, model, trials, workers=workers)
        for handle in handles
    }
