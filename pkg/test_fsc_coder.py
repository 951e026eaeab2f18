"""
Tests for the Fourier Series Coder
"""

import math

import numpy as np
import pytest

from angle_core import LE90, OC, angle_grid, angular_distance, angular_distances, wrap_to_range
from errors import DegenerateModulusError, InvalidInputError
from fsc_coder import (
    FourierSeriesCoder,
    dc_target,
    decode,
    decode_batch,
    decode_single,
    encode,
    encode_batch,
    per_frequency_modulus,
)
from models import CoderSpec

PI = math.pi


def angle(value: float):
    return wrap_to_range(value, LE90)


def test_encode_examples():
    np.testing.assert_allclose(encode(angle(0.0), CoderSpec(n_freq=1)).as_array(), [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(encode(angle(PI / 4), CoderSpec(n_freq=2)).as_array(), [0, 0, 1, -1, 0],
                               atol=1e-12)
    r = math.sqrt(0.5)
    np.testing.assert_allclose(encode(angle(PI / 8), CoderSpec(n_freq=2)).as_array(), [0, r, r, 0, 1],
                               atol=1e-12)


@pytest.mark.parametrize("n_freq", [1, 2, 4])
def test_dc_target_is_zero(n_freq):
    spec = CoderSpec(n_freq=n_freq)
    assert dc_target(spec) == 0
    assert encode(angle(0.7), spec).components[0] == 0


def test_channel_layout():
    assert CoderSpec(n_freq=2).channel_count == 5
    assert CoderSpec(n_freq=2, include_dc=False).channel_count == 4
    spec = CoderSpec(n_freq=3)
    assert (spec.cos_index(1), spec.sin_index(1), spec.cos_index(3), spec.sin_index(3)) == (1, 2, 5, 6)
    with pytest.raises(ValueError):
        CoderSpec(n_freq=0)


def test_encode_without_dc_drops_anchor():
    row = encode(angle(0.3), CoderSpec(n_freq=2, include_dc=False)).as_array()
    np.testing.assert_allclose(row, [math.cos(0.6), math.sin(0.6), math.cos(1.2), math.sin(1.2)])


def test_decode_single_examples():
    assert decode_single(1, 0, 1, 2) == 0
    assert decode_single(0, 1, 1, 2) == pytest.approx(PI / 4)
    r = math.sqrt(0.5)
    assert decode_single(-r, -r, 2, 2) == pytest.approx(-3 * PI / 16)
    with pytest.raises(DegenerateModulusError):
        decode_single(0, 0, 1, 2)


def test_decode_examples():
    spec = CoderSpec(n_freq=2)
    assert decode(encode(angle(0.3), spec).components, spec).theta_pred.value == pytest.approx(0.3, abs=1e-12)
    result = decode(encode(angle(-PI / 2), spec).components, spec)
    assert angular_distance(result.theta_pred.value, -PI / 2, PI) < 1e-12
    assert LE90.lower_bound <= result.theta_pred.value < LE90.upper_bound
    assert len(result.gamma_estimates) == 2


@pytest.mark.parametrize("n_freq", [1, 2, 4])
def test_round_trip_over_fine_grid(fine_grid, n_freq):
    spec = CoderSpec(n_freq=n_freq)
    decoded = decode_batch(encode_batch(fine_grid, spec), spec)
    assert not decoded.degenerate.any()
    assert np.max(angular_distances(decoded.theta, fine_grid, PI)) < 1e-9
    assert np.all((decoded.theta >= -PI / 2) & (decoded.theta < PI / 2))


def test_round_trip_other_definition():
    spec = CoderSpec(n_freq=2, omega=4, definition=OC)
    grid = angle_grid(OC, math.radians(0.05))
    decoded = decode_batch(encode_batch(grid, spec), spec)
    assert np.max(angular_distances(decoded.theta, grid, OC.period)) < 1e-9


def test_branch_correction_matches_brute_force_oracle():
    spec = CoderSpec(n_freq=2)
    thetas = -PI / 2 + 1e-3 * np.arange(int(PI / 1e-3))
    raw = encode_batch(thetas, spec)
    decoded = decode_batch(raw, spec)
    fine_only = 0.5 * np.arctan2(raw[:, 4], raw[:, 3]) / spec.omega
    # the fine estimate alone lands half a period away exactly where wrapping must fire
    needs_fix = angular_distances(fine_only, thetas, PI) > PI / 4
    np.testing.assert_array_equal(decoded.branch_corrected, needs_fix)
    assert needs_fix.any() and not needs_fix.all()


def test_per_frequency_modulus_examples():
    spec = CoderSpec(n_freq=2)
    clean = encode(angle(0.9), spec).as_array()
    np.testing.assert_allclose(per_frequency_modulus(clean, spec), [1, 1], atol=1e-15)
    np.testing.assert_allclose(per_frequency_modulus(0.5 * clean, spec), [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(per_frequency_modulus([0, 0.6, 0.8, 0.3, -0.4], spec), [1.0, 0.5])


@pytest.mark.parametrize("n_freq", [1, 2, 4])
def test_boundary_continuity(n_freq):
    spec = CoderSpec(n_freq=n_freq)
    delta = 1e-4
    low = encode(angle(-PI / 2 + delta), spec).as_array()
    high = encode(angle(PI / 2 - delta), spec).as_array()
    assert np.max(np.abs(low - high)) <= 2 * n_freq * spec.omega * delta


def test_decode_is_scale_invariant(rng):
    spec = CoderSpec(n_freq=2)
    raw = encode_batch(rng.uniform(-PI / 2, PI / 2, 50), spec) + rng.normal(0, 0.05, (50, 5))
    base = decode_batch(raw, spec).theta
    for scale in (0.01, 0.5, 3.0):
        np.testing.assert_allclose(angular_distances(decode_batch(scale * raw, spec).theta, base, PI), 0,
                                   atol=1e-12)


def test_degenerate_modulus():
    spec = CoderSpec(n_freq=2)
    with pytest.raises(DegenerateModulusError):
        decode([0.3, 1.0, 0.0, 0.0, 0.0], spec)
    batch = decode_batch(np.array([[0.0, 1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 1.0, 0.0]]), spec)
    assert batch.degenerate.tolist() == [True, False]
    assert math.isnan(batch.theta[0])
    assert batch.theta[1] == pytest.approx(0.0)


def test_modulus_floor_is_configurable():
    spec = CoderSpec(n_freq=1, modulus_floor=0.5)
    with pytest.raises(DegenerateModulusError):
        decode([0.0, 0.3, 0.3], spec)
    assert decode([0.0, 0.6, 0.0], spec).theta_pred.value == pytest.approx(0.0)


def test_dc_channel_is_ignored():
    spec = CoderSpec(n_freq=2)
    raw = encode(angle(0.4), spec).as_array()
    raw[0] = 17.0
    assert decode(raw, spec).theta_pred.value == pytest.approx(0.4, abs=1e-12)


def test_without_cyclic_wrapping_decodes_from_fundamental():
    spec = CoderSpec(n_freq=2, cyclic_wrapping=False)
    raw = encode(angle(0.4), spec).as_array()
    raw[3:5] = [-0.2, 0.9]
    result = decode(raw, spec)
    assert result.theta_pred.value == pytest.approx(0.4, abs=1e-12)
    assert result.gamma_estimates == (pytest.approx(0.8),)
    assert not result.branch_corrected


def test_channel_mismatch_and_non_finite():
    spec = CoderSpec(n_freq=2)
    with pytest.raises(InvalidInputError):
        decode([0.0, 1.0, 0.0], spec)
    with pytest.raises(InvalidInputError):
        decode_batch([[0.0, 1.0, math.nan, 1.0, 0.0]], spec)
    with pytest.raises(InvalidInputError):
        decode(np.zeros((2, 5)), spec)


def test_coder_object_delegates():
    coder = FourierSeriesCoder(CoderSpec(n_freq=3))
    assert coder.channel_count == 7
    assert coder.definition == LE90
    encoded = coder.encode(angle(-0.2))
    assert coder.decode(encoded.components).theta_pred.value == pytest.approx(-0.2, abs=1e-12)
    assert coder.frequency_moduli(coder.encode_batch(np.array([0.1, 0.2]))).shape == (2, 3)
