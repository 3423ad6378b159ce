"""Tests for the Mel filter-bank front end"""
import math

import numpy as np
import pytest
import scipy.signal as sps

from uwdecode.errors import AllSilent, InvalidNoiseWindow, SignalTooShort, ConfigError
from uwdecode.frontend import (
    AudioSignal,
    FrontendConfig,
    NoiseEstimate,
    NOISE_ORACLE,
    analyze,
    compute_deltas,
    context_window,
    estimate_noise,
    estimate_noise_oracle,
    extract_features,
    frame_signal,
    hz_to_mel,
    log_features,
    log_norm_energy,
    mel_energies,
    mel_filterbank,
    mel_to_hz,
    segmental_snr,
)


class TestFrameSignal:

    def test_one_second_gives_98_frames(self, frontend_cfg, rng):
        signal = AudioSignal(rng.uniform(-0.5, 0.5, 16000), 16000)
        assert frame_signal(signal, frontend_cfg).shape == (98, 400)

    def test_exactly_one_frame(self, frontend_cfg):
        signal = AudioSignal(np.full(400, 0.1), 16000)
        assert frame_signal(signal, frontend_cfg).shape == (1, 400)

    def test_zero_signal_gives_zero_frames(self, frontend_cfg):
        frames = frame_signal(AudioSignal(np.zeros(1000), 16000), frontend_cfg)
        assert np.all(frames == 0)

    def test_too_short(self, frontend_cfg):
        with pytest.raises(SignalTooShort):
            frame_signal(AudioSignal(np.zeros(399), 16000), frontend_cfg)

    @pytest.mark.parametrize('length', [400, 401, 559, 560, 1234, 16000])
    def test_frame_count_formula(self, frontend_cfg, length):
        frames = frame_signal(AudioSignal(np.zeros(length), 16000), frontend_cfg)
        assert frames.shape[0] == (length - 400) // 160 + 1

    def test_hamming_window_applied(self):
        cfg = FrontendConfig(preemphasis=0.0)
        frames = frame_signal(AudioSignal(np.ones(400), 16000), cfg)
        np.testing.assert_allclose(frames[0], sps.get_window('hamming', 400, fftbins=False))

    def test_sample_rate_mismatch(self, frontend_cfg):
        with pytest.raises(ConfigError):
            frame_signal(AudioSignal(np.zeros(800), 8000), frontend_cfg)


class TestMelEnergies:

    def test_zero_frame(self, frontend_cfg):
        assert np.all(mel_energies(np.zeros(400), frontend_cfg) == 0)

    def test_sinusoid_concentrates_in_its_filter(self, frontend_cfg):
        points = np.linspace(hz_to_mel(0.0), hz_to_mel(8000.0), frontend_cfg.n_mel + 2)
        center_hz = float(mel_to_hz(points[31]))
        t = np.arange(400) / 16000.0
        frame = np.sin(2 * np.pi * center_hz * t) * sps.get_window('hamming', 400, fftbins=False)
        fe = mel_energies(frame, frontend_cfg)
        assert int(np.argmax(fe)) == 30
        assert fe[30] > fe[29] and fe[30] > fe[31]

    def test_white_noise_fills_every_filter(self, frontend_cfg, rng):
        frames = frame_signal(AudioSignal(rng.standard_normal(16000) * 0.1, 16000), frontend_cfg)
        fe = np.array([mel_energies(f, frontend_cfg) for f in frames])
        assert np.all(fe.mean(axis=0) > 0)

    def test_amplitude_scaling_is_quadratic(self, frontend_cfg, rng):
        x = rng.uniform(-0.3, 0.3, 4000)
        base = analyze(AudioSignal(x, 16000), frontend_cfg)
        scaled = analyze(AudioSignal(2.0 * x, 16000), frontend_cfg)
        np.testing.assert_allclose(scaled, 4.0 * base, rtol=1e-10, atol=1e-12)

    def test_filterbank_unit_peaks(self, frontend_cfg):
        fb = mel_filterbank(frontend_cfg)
        assert fb.shape == (40, 257)
        assert np.all(fb >= 0)
        assert np.all(fb.max(axis=1) <= 1.0 + 1e-12)


class TestLogFeatures:

    def test_hand_values(self, frontend_cfg):
        out = log_features(np.array([[math.e, 0.0, 1.0]]), frontend_cfg)
        np.testing.assert_allclose(out[0], [1.0, math.log(1e-10), 0.0], atol=1e-12)
        assert out[0, 1] == pytest.approx(-23.026, abs=1e-3)


class TestComputeDeltas:

    def test_constant_sequence(self):
        assert np.all(compute_deltas(np.full((7, 3), 4.2)) == 0)

    def test_linear_ramp_interior(self):
        delta = compute_deltas(np.arange(10, dtype=float))
        assert delta[5] == pytest.approx(1.0)

    def test_single_frame(self):
        assert np.all(compute_deltas(np.array([[3.0, -1.0]])) == 0)

    def test_linearity(self, rng):
        x, y = rng.normal(size=(12, 4)), rng.normal(size=(12, 4))
        np.testing.assert_allclose(compute_deltas(2.5 * x - 0.5 * y),
                                   2.5 * compute_deltas(x) - 0.5 * compute_deltas(y), atol=1e-12)


class TestLogNormEnergy:

    def test_peak_and_half(self):
        mel = np.array([[1.0, 1.0], [0.5, 0.5], [2.0, 2.0]])
        e = log_norm_energy(mel)
        assert e[2] == 0.0
        assert e[0] == pytest.approx(math.log(0.5))
        assert np.all(e <= 0)

    def test_uniform_energy(self):
        assert np.all(log_norm_energy(np.ones((5, 3))) == 0)

    def test_all_silent(self):
        with pytest.raises(AllSilent):
            log_norm_energy(np.zeros((4, 3)))

    def test_extract_features_shapes(self, frontend_cfg, rng):
        mel = analyze(AudioSignal(rng.uniform(-0.5, 0.5, 8000), 16000), frontend_cfg)
        feats = extract_features(mel, frontend_cfg)
        assert feats.stacked().shape == (feats.n_frames, 120)
        assert feats.log_norm_energy.max() == 0.0


class TestNoiseEstimate:

    def test_constant_lead_frames(self):
        assert np.all(estimate_noise(np.full((20, 4), 3.0), n_lead=10).en2 == 3.0)

    def test_two_lead_frames(self):
        mel = np.array([[2.0], [4.0], [100.0]])
        assert estimate_noise(mel, n_lead=2).en2[0] == pytest.approx(3.0)

    @pytest.mark.parametrize('n_lead', [0, 4])
    def test_window_out_of_range(self, n_lead):
        with pytest.raises(InvalidNoiseWindow):
            estimate_noise(np.ones((3, 2)), n_lead=n_lead)

    def test_oracle_of_zero_signal(self, frontend_cfg):
        noise = estimate_noise_oracle(analyze(AudioSignal(np.zeros(2000), 16000), frontend_cfg))
        assert noise.source == NOISE_ORACLE
        assert np.all(noise.en2 == 0)


class TestSegmentalSnr:

    def test_hand_values(self):
        noise = NoiseEstimate(np.array([1.0, 1.0, 1.0]))
        snr = segmental_snr(np.array([2.0, 101.0, 0.5]), noise)
        np.testing.assert_allclose(snr, [0.0, 20.0, 0.0], atol=1e-12)

    def test_unclamped_is_negative_below_noise(self):
        noise = NoiseEstimate(np.array([1.0]))
        assert segmental_snr(np.array([1.5]), noise, clamp=False)[0] < 0


class TestContextWindow:

    def test_edges_replicated(self):
        m = np.arange(4, dtype=float)[:, None]
        out = context_window(m, 1)
        np.testing.assert_array_equal(out[0], [0, 0, 1])
        np.testing.assert_array_equal(out[3], [2, 3, 3])
