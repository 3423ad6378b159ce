"""
Spectral subtraction in the Mel filter-energy domain
"""
import logging
from dataclasses import dataclass

import numpy as np

from uwdecode.errors import ConfigError, DimMismatch
from uwdecode.frontend import NoiseEstimate, segmental_snr

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SSConfig:
    """Oversubtraction at 0 dB, spectral floor fraction, and the SNR where alpha reaches 1"""
    alpha0: float = 2.0
    beta: float = 0.1
    snr_knee: float = 18.0

    def validate(self) -> 'SSConfig':
        if self.alpha0 < 1.0:
            raise ConfigError(f"alpha0 must be >= 1, got {self.alpha0}")
        if not 0.0 < self.beta < 1.0:
            raise ConfigError(f"beta must be in (0, 1), got {self.beta}")
        if self.snr_knee <= 0:
            raise ConfigError(f"snr_knee must be > 0, got {self.snr_knee}")
        return self


def oversubtraction_factor(snr_db, cfg: SSConfig):
    """
    SNR-dependent oversubtraction factor.

    alpha0 at 0 dB falling linearly to 1 at the knee, 1 above it. Accepts a
    scalar or an array of (already clamped) SNR values.
    """
    snr = np.asarray(snr_db, dtype=np.float64)
    alpha = np.where(
        snr >= cfg.snr_knee,
        1.0,
        cfg.alpha0 - (cfg.alpha0 - 1.0) * snr / cfg.snr_knee,
    )
    # values below 0 dB are not expected, but keep alpha capped at alpha0
    alpha = np.minimum(alpha, cfg.alpha0)
    return float(alpha) if alpha.ndim == 0 else alpha


def spectral_subtract(mel: np.ndarray, noise: NoiseEstimate, cfg: SSConfig,
                      energy_floor: float = 1e-10) -> np.ndarray:
    """
    Compensated filter energies FE^SS = max(beta*FE, FE - alpha(SNR)*E[n^2]).

    Args:
        mel: One Mel frame (n_mel,) or a sequence (T, n_mel)
        noise: Per-filter noise estimate
        cfg: Subtraction parameters
        energy_floor: epsilon used inside the segmental SNR

    Returns:
        Enhanced filter energies, same shape as mel
    """
    fe = np.asarray(mel, dtype=np.float64)
    if fe.shape[-1] != noise.en2.shape[-1]:
        raise DimMismatch(f"Mel frame has {fe.shape[-1]} filters, noise estimate {noise.en2.shape[-1]}")
    snr = segmental_snr(fe, noise, energy_floor=energy_floor, clamp=True)
    alpha = oversubtraction_factor(snr, cfg)
    return np.maximum(cfg.beta * fe, fe - alpha * noise.en2)


def enhance_utterance(mel_seq: np.ndarray, noise: NoiseEstimate, cfg: SSConfig,
                      energy_floor: float = 1e-10) -> np.ndarray:
    mel_seq = np.asarray(mel_seq, dtype=np.float64)
    if mel_seq.ndim != 2:
        raise DimMismatch(f"Expected a (T, n_mel) sequence, got shape {mel_seq.shape}")
    enhanced = spectral_subtract(mel_seq, noise, cfg, energy_floor)
    floored = np.mean(enhanced <= cfg.beta * mel_seq)
    logger.debug(f"Spectral subtraction: {mel_seq.shape[0]} frames, {floored:.1%} of cells at floor")
    return enhanced
