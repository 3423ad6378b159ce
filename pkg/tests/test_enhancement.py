"""Tests for Mel-domain spectral subtraction"""
import numpy as np
import pytest

from uwdecode.enhancement import SSConfig, enhance_utterance, oversubtraction_factor, spectral_subtract
from uwdecode.errors import ConfigError, DimMismatch
from uwdecode.frontend import NoiseEstimate


class TestOversubtractionFactor:

    @pytest.mark.parametrize('snr, alpha', [(0.0, 2.0), (9.0, 1.5), (18.0, 1.0), (40.0, 1.0)])
    def test_hand_values(self, snr, alpha):
        assert oversubtraction_factor(snr, SSConfig()) == alpha

    def test_continuous_and_non_increasing(self):
        snr = np.linspace(0, 30, 3001)
        alpha = oversubtraction_factor(snr, SSConfig())
        assert np.all(np.diff(alpha) <= 0)
        assert oversubtraction_factor(18.0 - 1e-9, SSConfig()) == pytest.approx(1.0, abs=1e-9)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            SSConfig(alpha0=0.5).validate()
        with pytest.raises(ConfigError):
            SSConfig(beta=1.0).validate()


class TestSpectralSubtract:

    def test_floor_case(self):
        out = spectral_subtract(np.array([1.0]), NoiseEstimate(np.array([0.6])), SSConfig())
        assert out[0] == pytest.approx(0.1)

    def test_high_snr_case(self):
        out = spectral_subtract(np.array([10.0]), NoiseEstimate(np.array([0.1])), SSConfig())
        assert out[0] == pytest.approx(9.9)

    def test_zero_noise_identity(self, rng):
        fe = rng.uniform(0, 5, 40)
        np.testing.assert_array_equal(spectral_subtract(fe, NoiseEstimate(np.zeros(40)), SSConfig()), fe)

    def test_floor_invariant_random_frames(self, rng):
        cfg = SSConfig()
        fe = rng.exponential(1.0, size=(100000, 4))
        noise = NoiseEstimate(rng.exponential(0.5, size=4))
        out = spectral_subtract(fe, noise, cfg)
        assert np.all(out >= cfg.beta * fe)
        assert np.all(out <= fe)

    def test_homogeneity(self, rng):
        fe = rng.uniform(0.1, 10, size=(50, 6))
        en2 = rng.uniform(0.1, 2, size=6)
        base = spectral_subtract(fe, NoiseEstimate(en2), SSConfig())
        scaled = spectral_subtract(7.0 * fe, NoiseEstimate(7.0 * en2), SSConfig())
        np.testing.assert_allclose(scaled, 7.0 * base, rtol=1e-9)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            spectral_subtract(np.ones(4), NoiseEstimate(np.ones(3)), SSConfig())

    def test_enhance_utterance_needs_sequence(self):
        with pytest.raises(DimMismatch):
            enhance_utterance(np.ones(4), NoiseEstimate(np.ones(4)), SSConfig())
