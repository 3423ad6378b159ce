"""
Mel filter-bank front end.

Frames audio, computes Mel filter energies and their log/dynamic features,
and estimates the per-filter noise energy and segmental SNR consumed by
spectral subtraction and the additive-noise uncertainty model.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import signal as sps
from scipy.fft import rfft

from uwdecode.errors import (
    AllSilent,
    ConfigError,
    DimMismatch,
    EmptyInput,
    InvalidNoiseWindow,
    InvalidSignal,
    SignalTooShort,
)

logger = logging.getLogger(__name__)

NOISE_LEADING = 'leading-frames'
NOISE_ORACLE = 'oracle'


@dataclass
class AudioSignal:
    """Mono audio, samples nominally in [-1, 1]"""
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise InvalidSignal(f"Expected mono samples, got shape {self.samples.shape}")
        if int(self.sample_rate) <= 0:
            raise InvalidSignal(f"Sample rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidSignal("Audio contains non-finite samples")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def power(self) -> float:
        """Mean squared amplitude over the whole signal"""
        if len(self.samples) == 0:
            return 0.0
        return float(np.mean(self.samples ** 2))


@dataclass(frozen=True)
class FrontendConfig:
    """Analysis parameters; defaults follow the 40-filter MelFB setup at 16 kHz"""
    sample_rate: int = 16000
    frame_len_ms: float = 25.0
    frame_shift_ms: float = 10.0
    fft_size: int = 512
    n_mel: int = 40
    mel_fmin: float = 0.0
    mel_fmax: Optional[float] = None
    energy_floor: float = 1e-10
    delta_order: int = 2
    preemphasis: float = 0.97

    @property
    def frame_len(self) -> int:
        return int(round(self.sample_rate * self.frame_len_ms / 1000.0))

    @property
    def frame_shift(self) -> int:
        return int(round(self.sample_rate * self.frame_shift_ms / 1000.0))

    @property
    def fmax(self) -> float:
        return float(self.mel_fmax) if self.mel_fmax is not None else self.sample_rate / 2.0

    def n_samples_for(self, n_frames: int) -> int:
        """Signal length that yields exactly n_frames analysis frames"""
        return (n_frames - 1) * self.frame_shift + self.frame_len

    def validate(self) -> 'FrontendConfig':
        if self.n_mel < 1:
            raise ConfigError(f"n_mel must be >= 1, got {self.n_mel}")
        if not 0.0 <= self.mel_fmin < self.fmax <= self.sample_rate / 2.0:
            raise ConfigError(
                f"Need 0 <= fmin < fmax <= sample_rate/2, got fmin={self.mel_fmin}, fmax={self.fmax}")
        if self.energy_floor <= 0:
            raise ConfigError(f"energy_floor must be > 0, got {self.energy_floor}")
        if self.frame_len < 1 or self.frame_shift < 1:
            raise ConfigError("Frame length and shift must be at least one sample")
        if self.fft_size < self.frame_len or self.fft_size & (self.fft_size - 1):
            raise ConfigError(
                f"fft_size must be a power of two >= frame length ({self.frame_len}), got {self.fft_size}")
        if not 0.0 <= self.preemphasis < 1.0:
            raise ConfigError(f"preemphasis must be in [0, 1), got {self.preemphasis}")
        if self.delta_order < 1:
            raise ConfigError(f"delta_order must be >= 1, got {self.delta_order}")
        return self


@dataclass
class NoiseEstimate:
    """Per-filter expected noise energy E[n_m^2]"""
    en2: np.ndarray
    source: str = NOISE_LEADING

    def __post_init__(self):
        self.en2 = np.asarray(self.en2, dtype=np.float64)
        if np.any(self.en2 < 0):
            raise ConfigError("Noise energies must be non-negative")


@dataclass
class Features:
    """Per-frame static, delta and delta-delta log Mel energies plus log-normalized energy"""
    static: np.ndarray
    delta: np.ndarray
    delta2: np.ndarray
    log_norm_energy: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.static.shape[0]

    def stacked(self) -> np.ndarray:
        """(T, 3*n_mel) matrix: statics, deltas, delta-deltas"""
        return np.hstack([self.static, self.delta, self.delta2])


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=16)
def _filterbank(sample_rate: int, fft_size: int, n_mel: int, fmin: float, fmax: float) -> np.ndarray:
    mel_points = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mel + 2)
    hz_points = mel_to_hz(mel_points)
    bin_freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size

    lower = hz_points[:-2, None]
    center = hz_points[1:-1, None]
    upper = hz_points[2:, None]
    rising = (bin_freqs[None, :] - lower) / (center - lower)
    falling = (upper - bin_freqs[None, :]) / (upper - center)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.flags.writeable = False
    return fb


def mel_filterbank(cfg: FrontendConfig) -> np.ndarray:
    """Unit-peak triangular filters, shape (n_mel, fft_size//2 + 1)"""
    return _filterbank(cfg.sample_rate, cfg.fft_size, cfg.n_mel, float(cfg.mel_fmin), cfg.fmax)


@lru_cache(maxsize=8)
def _hamming(n: int) -> np.ndarray:
    window = sps.get_window('hamming', n, fftbins=False)
    window.flags.writeable = False
    return window


def frame_signal(signal: AudioSignal, cfg: FrontendConfig) -> np.ndarray:
    """
    Cut a signal into Hamming-windowed analysis frames.

    Preemphasis (if configured) is applied to the whole signal before framing.

    Args:
        signal: Input audio
        cfg: Front-end configuration

    Returns:
        Array of shape (n_frames, frame_len) with
        n_frames = floor((len - frame_len) / shift) + 1
    """
    if signal.sample_rate != cfg.sample_rate:
        raise ConfigError(
            f"Signal sample rate {signal.sample_rate} does not match front end ({cfg.sample_rate})")
    frame_len, shift = cfg.frame_len, cfg.frame_shift
    x = signal.samples
    if len(x) < frame_len:
        raise SignalTooShort(f"Signal has {len(x)} samples, need at least {frame_len}")

    if cfg.preemphasis > 0:
        x = np.concatenate([x[:1], x[1:] - cfg.preemphasis * x[:-1]])

    n_frames = (len(x) - frame_len) // shift + 1
    frames = np.lib.stride_tricks.sliding_window_view(x, frame_len)[::shift][:n_frames]
    return frames * _hamming(frame_len)


def mel_energies(frame: np.ndarray, cfg: FrontendConfig) -> np.ndarray:
    """Power spectrum of one windowed frame projected onto the Mel filters"""
    power = np.abs(rfft(np.asarray(frame, dtype=np.float64), n=cfg.fft_size)) ** 2
    return mel_filterbank(cfg) @ power


def mel_spectrogram(frames: np.ndarray, cfg: FrontendConfig) -> np.ndarray:
    """Vectorized mel_energies over a (T, frame_len) frame matrix -> (T, n_mel)"""
    power = np.abs(rfft(np.asarray(frames, dtype=np.float64), n=cfg.fft_size, axis=-1)) ** 2
    return power @ mel_filterbank(cfg).T


def analyze(signal: AudioSignal, cfg: FrontendConfig) -> np.ndarray:
    return mel_spectrogram(frame_signal(signal, cfg), cfg)


def log_features(mel_seq: np.ndarray, cfg: FrontendConfig) -> np.ndarray:
    return np.log(np.maximum(np.asarray(mel_seq, dtype=np.float64), cfg.energy_floor))


def compute_deltas(static_seq: np.ndarray, n: int = 2) -> np.ndarray:
    """
    Regression deltas over +-n frames with edge replication.

    delta_t = sum_k k * (c[t+k] - c[t-k]) / (2 * sum_k k^2)

    Args:
        static_seq: (T,) or (T, D) sequence
        n: Regression half-window

    Returns:
        Delta sequence with the same shape
    """
    c = np.asarray(static_seq, dtype=np.float64)
    if c.shape[0] == 0:
        raise EmptyInput("Cannot compute deltas of an empty sequence")
    n_frames = c.shape[0]
    pad = [(n, n)] + [(0, 0)] * (c.ndim - 1)
    padded = np.pad(c, pad, mode='edge')
    denom = 2.0 * sum(k * k for k in range(1, n + 1))

    delta = np.zeros_like(c)
    for k in range(1, n + 1):
        delta += k * (padded[n + k:n + k + n_frames] - padded[n - k:n - k + n_frames])
    return delta / denom


def log_norm_energy(mel_seq: np.ndarray, energy_floor: float = 1e-10) -> np.ndarray:
    """ln(E_t / max_u E_u) with E_t the summed filter energy of frame t"""
    energy = np.asarray(mel_seq, dtype=np.float64).sum(axis=1)
    peak = energy.max() if energy.size else 0.0
    if peak <= 0:
        raise AllSilent("Every frame of the utterance has zero energy")
    return np.minimum(np.log(np.maximum(energy, energy_floor) / peak), 0.0)


def extract_features(mel_seq: np.ndarray, cfg: FrontendConfig) -> Features:
    static = log_features(mel_seq, cfg)
    delta = compute_deltas(static, cfg.delta_order)
    delta2 = compute_deltas(delta, cfg.delta_order)
    return Features(
        static=static,
        delta=delta,
        delta2=delta2,
        log_norm_energy=log_norm_energy(mel_seq, cfg.energy_floor),
    )


def context_window(matrix: np.ndarray, half_width: int) -> np.ndarray:
    """Stack frames t-L..t+L (edge-replicated) into one row per frame"""
    m = np.asarray(matrix, dtype=np.float64)
    if half_width == 0:
        return m.copy()
    n_frames = m.shape[0]
    padded = np.pad(m, [(half_width, half_width), (0, 0)], mode='edge')
    return np.concatenate(
        [padded[i:i + n_frames] for i in range(2 * half_width + 1)], axis=1)


def estimate_noise(mel_seq: np.ndarray, n_lead: int = 10) -> NoiseEstimate:
    """Average the first n_lead frames, taken to be non-speech"""
    mel_seq = np.asarray(mel_seq, dtype=np.float64)
    if n_lead < 1 or n_lead > mel_seq.shape[0]:
        raise InvalidNoiseWindow(
            f"n_lead={n_lead} outside [1, {mel_seq.shape[0]}]")
    return NoiseEstimate(en2=mel_seq[:n_lead].mean(axis=0), source=NOISE_LEADING)


def estimate_noise_oracle(noise_mel_seq: np.ndarray) -> NoiseEstimate:
    """Average over every frame of the known injected noise"""
    noise_mel_seq = np.asarray(noise_mel_seq, dtype=np.float64)
    if noise_mel_seq.shape[0] == 0:
        raise InvalidNoiseWindow("Oracle noise sequence is empty")
    return NoiseEstimate(en2=noise_mel_seq.mean(axis=0), source=NOISE_ORACLE)


def segmental_snr(mel: np.ndarray, noise: NoiseEstimate, energy_floor: float = 1e-10,
                  clamp: bool = True) -> np.ndarray:
    """
    Per-filter segmental SNR in dB for one frame (or a (T, n_mel) sequence).

    SNR_m = 10 log10(max(fe_m - en2_m, eps) / max(en2_m, eps)), clamped at 0 dB
    when clamp is set.
    """
    fe = np.asarray(mel, dtype=np.float64)
    if fe.shape[-1] != noise.en2.shape[-1]:
        raise DimMismatch(f"Mel frame has {fe.shape[-1]} filters, noise estimate {noise.en2.shape[-1]}")
    snr = 10.0 * np.log10(np.maximum(fe - noise.en2, energy_floor) / np.maximum(noise.en2, energy_floor))
    return np.maximum(snr, 0.0) if clamp else snr
