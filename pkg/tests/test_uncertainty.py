"""Tests for uncertainty variances and the weighting curve"""
import numpy as np
import pytest

from uwdecode.errors import DimMismatch
from uwdecode.frontend import NoiseEstimate
from uwdecode.uncertainty import (
    ModelUncertaintyConfig,
    UncertaintyTrack,
    WeightingParams,
    delta_uncertainty,
    model_uncertainty,
    model_uv_scalar,
    mse_uncertainty,
    uncertainty_weight,
    window_uv,
)


class TestUncertaintyWeight:

    def test_unity_below_threshold(self, rng):
        params = WeightingParams(th=3.0, k=2.0)
        uv = rng.uniform(0, 3.0, 1000)
        assert np.all(uncertainty_weight(uv, params) == 1.0)

    def test_continuity_at_threshold(self):
        params = WeightingParams(th=8.0, k=5.0)
        assert abs(uncertainty_weight(8.0 + 1e-13, params) - 1.0) < 1e-12

    def test_strictly_decreasing_above_threshold(self):
        params = WeightingParams(th=2.0, k=4.0)
        uv = np.linspace(2.0 + 1e-6, 200.0, 5000)
        assert np.all(np.diff(uncertainty_weight(uv, params)) < 0)

    def test_hand_values(self):
        assert abs(uncertainty_weight(2.0, WeightingParams(1.0, 1.0)) - 0.5) < 1e-12
        assert abs(uncertainty_weight(10.0, WeightingParams(8.0, 5.0)) - 4.0 / 9.0) < 1e-12

    def test_vanishes_for_huge_uncertainty(self):
        assert uncertainty_weight(1e12, WeightingParams(1.0, 1.0)) < 1e-11

    def test_infinite_threshold_is_all_ones(self, rng):
        uv = rng.uniform(0, 1e6, 50)
        np.testing.assert_array_equal(uncertainty_weight(uv, WeightingParams(np.inf, 1.0)), np.ones(50))

    def test_small_k_approaches_one(self):
        assert uncertainty_weight(20.0, WeightingParams(1.0, 1e-6)) > 0.9999


class TestModelUncertainty:

    def test_branch_one_hand_value(self):
        var = model_uncertainty(np.array([2.5]), NoiseEstimate(np.array([1.0])))
        assert abs(var[0] - 0.2) < 1e-12

    def test_branch_two_hand_value(self):
        var = model_uncertainty(np.array([1.5]), NoiseEstimate(np.array([1.0])))
        assert abs(var[0] - 1.0 / 3.0) < 1e-12

    def test_zero_noise(self):
        assert model_uncertainty(np.array([3.0]), NoiseEstimate(np.array([0.0])))[0] == 0.0

    def test_branch_continuity(self, rng):
        c = rng.uniform(0.01, 1.0, 1000)
        en2 = rng.uniform(0.01, 10.0, 1000)
        for ci, ei in zip(c, en2):
            y2 = ei + 10.0 * ci * ei
            var = model_uncertainty(np.array([y2]), NoiseEstimate(np.array([ei])), ModelUncertaintyConfig(c=ci))
            assert abs(var[0] - 0.2) < 1e-12

    def test_range(self, rng):
        y2 = rng.exponential(2.0, size=(200, 40))
        noise = NoiseEstimate(rng.exponential(1.0, size=40))
        var = model_uncertainty(y2, noise)
        assert np.all(var >= 0) and np.all(var <= 0.4)

    def test_below_noise_is_capped(self):
        assert model_uncertainty(np.array([0.5]), NoiseEstimate(np.array([1.0])))[0] == pytest.approx(0.4)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            model_uncertainty(np.ones(3), NoiseEstimate(np.ones(4)))

    def test_scalar_per_frame(self):
        assert model_uv_scalar(np.array([[0.1, 0.3], [0.2, 0.2]])).tolist() == pytest.approx([0.2, 0.2])


class TestDeltaUncertainty:

    def test_constant_variance(self):
        dvar, ddvar = delta_uncertainty(np.full((9, 2), 0.5))
        np.testing.assert_allclose(dvar, 0.05)
        np.testing.assert_allclose(ddvar, 0.005)

    def test_zeros(self):
        dvar, ddvar = delta_uncertainty(np.zeros((5, 3)))
        assert np.all(dvar == 0) and np.all(ddvar == 0)

    def test_single_impulse(self):
        v = np.zeros(11)
        v[5] = 1.0
        dvar, _ = delta_uncertainty(v)
        np.testing.assert_allclose(dvar[[3, 4, 6, 7]], [0.04, 0.01, 0.01, 0.04])
        assert dvar[5] == 0.0


class TestMseUncertainty:

    def test_identical(self, rng):
        x = rng.normal(size=40)
        assert mse_uncertainty(x, x) == 0.0

    def test_hand_value(self):
        assert mse_uncertainty(np.array([1.0, 3.0]), np.array([2.0, 1.0])) == pytest.approx(2.5)

    def test_sequence(self, rng):
        clean = rng.normal(size=(6, 40))
        uv = mse_uncertainty(clean, clean + 1.0)
        np.testing.assert_allclose(uv, np.ones(6))

    def test_shared_permutation_invariant(self, rng):
        clean, enhanced = rng.normal(size=(5, 40)), rng.normal(size=(5, 40))
        order = rng.permutation(40)
        np.testing.assert_allclose(mse_uncertainty(clean[:, order], enhanced[:, order]),
                                   mse_uncertainty(clean, enhanced), rtol=1e-12)

    @pytest.mark.parametrize('gain', [0.5, 3.0])
    def test_scales_with_squared_gain(self, rng, gain):
        clean, enhanced = rng.normal(size=(5, 40)), rng.normal(size=(5, 40))
        scaled = clean + gain * (enhanced - clean)
        np.testing.assert_allclose(mse_uncertainty(clean, scaled),
                                   gain ** 2 * mse_uncertainty(clean, enhanced), rtol=1e-10)

    def test_length_mismatch(self):
        with pytest.raises(DimMismatch):
            mse_uncertainty(np.ones(3), np.ones(4))


class TestWindowUv:

    def test_interior_mean(self):
        assert window_uv(np.array([1.0, 2.0, 3.0]), 1)[1] == pytest.approx(2.0)

    def test_constant_unchanged(self):
        np.testing.assert_allclose(window_uv(np.full(20, 3.5), 5), 3.5)

    def test_zero_width_identity(self, rng):
        uv = rng.uniform(size=12)
        np.testing.assert_array_equal(window_uv(uv, 0), uv)

    def test_constant_shift(self, rng):
        uv = rng.uniform(0, 5, 64)
        np.testing.assert_allclose(window_uv(uv + 2.0, 5), window_uv(uv, 5) + 2.0, atol=1e-12)

    def test_edges_replicated(self):
        out = window_uv(np.array([3.0, 0.0, 0.0, 0.0]), 1)
        assert out[0] == pytest.approx(2.0)

    def test_track_from_uv(self):
        track = UncertaintyTrack.from_uv(np.array([0.0, 10.0, 0.0]), 0, WeightingParams(1.0, 1.0))
        assert track.n_frames == 3
        np.testing.assert_allclose(track.uw, [1.0, 0.1, 1.0])
