"""
Counter-based Gaussian noise for reproducible, shardable simulations.

Trial indices are grouped into fixed blocks of ``BLOCK_TRIALS``. Block ``b`` of
seed ``s`` is drawn from a Philox generator keyed by ``s`` with its counter
started at ``b << 128``, so the draw for (seed, trial, channel) never depends
on how trials are split across workers.
"""

from typing import Iterator, Sequence, Tuple

import numpy as np
import structlog

from errors import InvalidInputError
from models import NoiseModel

logger = structlog.get_logger(__name__)

BLOCK_TRIALS = 4096
_MASK64 = (1 << 64) - 1


def block_generator(seed: int, block_index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(key=seed & _MASK64, counter=block_index << 128)
    )


def standard_normal_block(seed: int, block_index: int, channels: int, rows: int = BLOCK_TRIALS) -> np.ndarray:
    """First ``rows`` rows of the (BLOCK_TRIALS, channels) normal matrix of one block"""
    return block_generator(seed, block_index).standard_normal((rows, channels))


def iter_blocks(start: int, stop: int) -> Iterator[Tuple[int, int, int]]:
    """Yield (block_index, first_row, last_row_exclusive) covering trials [start, stop)"""
    trial = start
    while trial < stop:
        block = trial // BLOCK_TRIALS
        first = trial - block * BLOCK_TRIALS
        last = min(stop - block * BLOCK_TRIALS, BLOCK_TRIALS)
        yield block, first, last
        trial = block * BLOCK_TRIALS + last


def standard_normal_rows(seed: int, start: int, stop: int, channels: int) -> np.ndarray:
    """Normal draws for trials [start, stop), one row per trial"""
    if start < 0 or stop < start:
        raise InvalidInputError(f"bad trial range [{start}, {stop})")
    parts = [
        standard_normal_block(seed, block, channels, rows=last)[first:last]
        for block, first, last in iter_blocks(start, stop)
    ]
    if not parts:
        return np.empty((0, channels))
    return np.concatenate(parts, axis=0)


def perturb_batch(clean: np.ndarray, model: NoiseModel, start: int = 0) -> np.ndarray:
    """m * clean + N(0, sigma^2) for rows that are trials start, start+1, ..."""
    clean = np.atleast_2d(np.asarray(clean, dtype=float))
    scaled = model.modulus_scale * clean
    if model.sigma == 0:
        return scaled
    noise = standard_normal_rows(model.rng_seed, start, start + clean.shape[0], clean.shape[1])
    return scaled + model.sigma * noise


def perturb(clean: Sequence[float], model: NoiseModel, trial_index: int) -> np.ndarray:
    """Noisy copy of one clean encoding; deterministic in (seed, trial_index, channel).

    Every channel is perturbed; the DC channel's noise is ignored by the decoders.
    """
    if trial_index < 0:
        raise InvalidInputError(f"trial_index must be >= 0, got {trial_index}")
    clean = np.asarray(clean, dtype=float)
    if clean.ndim != 1:
        raise InvalidInputError("perturb takes one encoding vector")
    return perturb_batch(clean[None, :], model, start=trial_index)[0]
