"""
Tests for the PSC/PSCD and CSL baselines
"""

import math

import numpy as np
import pytest

from angle_core import LE90, angle_grid, angular_distance, angular_distances, wrap_to_range
from baseline_coders import (
    CircularSmoothLabelCoder,
    PhaseShiftingCoder,
    csl_decode,
    csl_decode_batch,
    csl_encode,
    csl_encode_batch,
    psc_decode,
    psc_decode_batch,
    psc_encode,
    psc_encode_batch,
    psc_frequency_moduli,
    psc_synthesize,
)
from errors import DegenerateModulusError, InvalidInputError
from models import PSC_PHASES, CslSpec, PscSpec

PI = math.pi
SINGLE = PscSpec()
DUAL = PscSpec(dual_frequency=True)


def angle(value: float):
    return wrap_to_range(value, LE90)


def test_psc_encode_examples():
    np.testing.assert_allclose(psc_encode(angle(0.0), SINGLE), [1, -0.5, -0.5], atol=1e-12)
    np.testing.assert_allclose(psc_encode(angle(0.0), DUAL), [1, -0.5, -0.5, 1, -0.5, -0.5], atol=1e-12)
    np.testing.assert_allclose(psc_encode(angle(PI / 8), SINGLE), [0.70711, -0.96593, 0.25882], atol=1e-5)


def test_psc_synthesize_examples():
    c, s = psc_synthesize([1, -0.5, -0.5], PSC_PHASES)
    assert (c, s) == (pytest.approx(1.5), pytest.approx(0.0, abs=1e-15))
    assert psc_synthesize([0, 0, 0], PSC_PHASES) == (0.0, 0.0)
    c, s = psc_synthesize(psc_encode(angle(PI / 8), SINGLE), PSC_PHASES)
    assert c * c + s * s == pytest.approx(2.25, abs=1e-12)
    with pytest.raises(InvalidInputError):
        psc_synthesize([1, 2], PSC_PHASES)


def test_clean_synthesis_modulus_over_sweep(fine_grid):
    moduli = psc_frequency_moduli(psc_encode_batch(fine_grid, DUAL), DUAL)
    assert moduli.shape == (fine_grid.size, 2)
    assert np.max(np.abs((1.5 * moduli) ** 2 - 2.25)) < 1e-9


@pytest.mark.parametrize("spec", [SINGLE, DUAL], ids=["psc", "pscd"])
def test_psc_round_trip(fine_grid, spec):
    decoded = psc_decode_batch(psc_encode_batch(fine_grid, spec), spec)
    assert np.max(angular_distances(decoded.theta, fine_grid, PI)) < 1e-9


def test_psc_decode_examples():
    assert psc_decode(psc_encode(angle(0.3), DUAL), DUAL).theta_pred.value == pytest.approx(0.3, abs=1e-12)
    boundary = psc_decode(psc_encode(angle(-PI / 2), SINGLE), SINGLE).theta_pred.value
    assert angular_distance(boundary, -PI / 2, PI) < 1e-12


def test_heuristic_fires_on_collapsed_modulus():
    spec = PscSpec(dual_frequency=True, heuristic_threshold=0.47)
    result = psc_decode(0.2 * psc_encode(angle(0.3), spec), spec)
    assert result.heuristic_fired
    assert result.theta_pred.value == 0.0
    assert not result.branch_corrected
    assert not psc_decode(psc_encode(angle(0.3), spec), spec).heuristic_fired


def test_heuristic_discontinuity_witness():
    with_heuristic = PscSpec(dual_frequency=True, heuristic_threshold=0.47)
    without = PscSpec(dual_frequency=True)
    clean = psc_encode(angle(0.6), with_heuristic)
    above, below = (0.47 + 1e-8) * clean, (0.47 - 1e-8) * clean
    assert np.linalg.norm(above - below) < 1e-6

    a = psc_decode(above, with_heuristic).theta_pred.value
    b = psc_decode(below, with_heuristic).theta_pred.value
    assert math.degrees(angular_distance(a, b, PI)) > 10

    a = psc_decode(above, without).theta_pred.value
    b = psc_decode(below, without).theta_pred.value
    assert angular_distance(a, b, PI) < 1e-4


def test_psc_zero_modulus_without_heuristic_raises():
    with pytest.raises(DegenerateModulusError):
        psc_decode([0.0, 0.0, 0.0], SINGLE)
    batch = psc_decode_batch(np.zeros((2, 6)), DUAL)
    assert batch.degenerate.all()


def test_psc_spec_contract():
    with pytest.raises(ValueError):
        PscSpec(phases=(0.0, 1.0, 2.0))
    with pytest.raises(ValueError):
        PscSpec(n_phase=4)
    assert DUAL.channel_count == 6
    with pytest.raises(InvalidInputError):
        psc_decode([1.0, 0.0, 0.0], DUAL)


def test_phase_shifting_coder_object():
    coder = PhaseShiftingCoder(DUAL)
    thetas = np.array([-0.4, 0.0, 1.1])
    np.testing.assert_allclose(coder.decode_batch(coder.encode_batch(thetas)).theta, thetas, atol=1e-12)
    np.testing.assert_allclose(coder.frequency_moduli(coder.encode_batch(thetas)), 1.0, atol=1e-12)


# CSL

CSL = CslSpec()


def test_csl_encode_peak_at_bin_center():
    center = LE90.lower_bound + 10.5 * CSL.bin_width
    label = csl_encode(angle(center), CSL)
    assert int(np.argmax(label)) == 10
    assert label[10] == 1.0
    assert label.sum() > 1


def test_csl_encode_index_arithmetic():
    assert int(np.argmax(csl_encode(angle(0.0), CSL))) == 22


def test_csl_window_is_circular_and_truncated():
    label = csl_encode(angle(LE90.lower_bound + 0.5 * CSL.bin_width), CSL)
    assert label[44] == pytest.approx(math.exp(-0.5 * (1 / 2) ** 2))
    assert label[6] > 0 and label[7] == 0.0
    one_hot = csl_encode(angle(0.0), CslSpec(window_radius=0))
    assert one_hot.sum() == 1.0


def test_csl_decode_examples():
    one_hot = np.zeros(45)
    one_hot[0] = 1.0
    assert csl_decode(one_hot, CSL).value == pytest.approx(LE90.lower_bound + 0.5 * PI / 45)
    assert csl_decode(np.ones(45), CSL).value == pytest.approx(LE90.lower_bound + 0.5 * PI / 45)


def test_csl_decode_rejects_bad_scores():
    with pytest.raises(InvalidInputError):
        csl_decode([], CSL)
    scores = np.zeros(45)
    scores[3] = math.nan
    with pytest.raises(InvalidInputError):
        csl_decode(scores, CSL)


def test_csl_quantization_bound(fine_grid):
    decoded = csl_decode_batch(csl_encode_batch(fine_grid, CSL), CSL)
    errors = angular_distances(decoded.theta, fine_grid, PI)
    assert np.max(errors) <= PI / 90 + 1e-12
    assert math.degrees(np.max(errors)) <= 2.0 + 1e-9

    centers = LE90.lower_bound + (np.arange(45) + 0.5) * CSL.bin_width
    exact = csl_decode_batch(csl_encode_batch(centers, CSL), CSL).theta
    assert np.max(angular_distances(exact, centers, PI)) < 1e-12


def test_csl_spec_contract():
    with pytest.raises(ValueError):
        CslSpec(n_bins=45, window_radius=23)
    with pytest.raises(ValueError):
        CslSpec(n_bins=1)


def test_csl_coder_object():
    coder = CircularSmoothLabelCoder(CslSpec(n_bins=90))
    grid = angle_grid(LE90, math.radians(0.5))
    decoded = coder.decode_batch(coder.encode_batch(grid))
    assert np.max(angular_distances(decoded.theta, grid, PI)) <= PI / 180 + 1e-12
    assert coder.frequency_moduli(coder.encode_batch(grid)).shape == (grid.size, 0)
