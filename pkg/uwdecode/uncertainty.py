"""
Uncertainty variances and the decoding weight derived from them.

Three sources feed the same weighting path:
    - the analytic additive-noise model (per filter, reduced to a frame scalar)
    - the oracle MSE between clean and enhanced statics
    - a trained regressor (see uwdecode.neuralnet.predict_uncertainty)

Each per-frame scalar is averaged over the DNN context window and mapped to a
weight in (0, 1] that scales the acoustic evidence during decoding.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.ndimage import uniform_filter1d

from uwdecode.errors import ConfigError, DimMismatch, EmptyInput
from uwdecode.frontend import NoiseEstimate

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class WeightingParams:
    """Threshold and slope of the weighting curve"""
    th: float
    k: float

    def validate(self) -> 'WeightingParams':
        if not self.th > 0:
            raise ConfigError(f"Th must be > 0, got {self.th}")
        if not self.k > 0:
            raise ConfigError(f"K must be > 0, got {self.k}")
        return self


@dataclass(frozen=True)
class ModelUncertaintyConfig:
    c: float = 0.15
    max_var: float = 0.4

    def validate(self) -> 'ModelUncertaintyConfig':
        if not self.c > 0:
            raise ConfigError(f"c must be > 0, got {self.c}")
        if not self.max_var > 0:
            raise ConfigError(f"max_var must be > 0, got {self.max_var}")
        return self


@dataclass
class UncertaintyTrack:
    """Per-frame uncertainty: raw UV_t, windowed UV[x_t], and the resulting weight"""
    uv: np.ndarray
    uv_window: np.ndarray
    uw: Optional[np.ndarray] = None

    @property
    def n_frames(self) -> int:
        return len(self.uv_window)

    @classmethod
    def from_uv(cls, uv: np.ndarray, half_width: int,
                params: Optional[WeightingParams] = None) -> 'UncertaintyTrack':
        uv = np.asarray(uv, dtype=np.float64)
        windowed = window_uv(uv, half_width)
        weights = uncertainty_weight(windowed, params) if params is not None else None
        return cls(uv=uv, uv_window=windowed, uw=weights)


def model_uncertainty(noisy: np.ndarray, noise: NoiseEstimate,
                      cfg: ModelUncertaintyConfig = ModelUncertaintyConfig()) -> np.ndarray:
    """
    Analytic noise-cancelling variance per filter from the additive-noise model.

    With d = max(y^2 - E[n^2], 0) and r = d / (10 c E[n^2]):
        r >= 1 -> 2 c E[n^2] / d
        r <  1 -> -d / (50 c E[n^2]) + 0.4
    E[n^2] = 0 gives 0; d = 0 gives the 0.4 cap. Works on one frame or a
    (T, n_mel) sequence.

    Args:
        noisy: Noisy filter energies y^2
        noise: Noise estimate E[n^2]
        cfg: Correction coefficient c (scalar or per filter) and variance cap

    Returns:
        Variances with the shape of noisy, each in [0, max_var]
    """
    y2 = np.asarray(noisy, dtype=np.float64)
    en2 = noise.en2
    if y2.shape[-1] != en2.shape[-1]:
        raise DimMismatch(f"Noisy frame has {y2.shape[-1]} filters, noise estimate {en2.shape[-1]}")
    c = np.broadcast_to(np.asarray(cfg.c, dtype=np.float64), en2.shape)

    d = np.maximum(y2 - en2, 0.0)
    scale = 10.0 * c * en2
    with np.errstate(divide='ignore', invalid='ignore'):
        high_snr = np.where(d > 0, 2.0 * c * en2 / d, np.inf)
        low_snr = -d / (50.0 * c * en2) + 0.4
        var = np.where(d >= scale, high_snr, low_snr)
    var = np.where(en2 > 0, var, 0.0)
    return np.minimum(var, cfg.max_var)


def delta_uncertainty(static_var_seq: np.ndarray, n: int = 2) -> Tuple[np.ndarray, np.ndarray]:
    """
    Propagate static variances through the delta regression, frames independent.

    Var(delta_t) = sum_k k^2 (V[t+k] + V[t-k]) / (2 sum_k k^2)^2, edges replicated;
    delta-delta variances apply the same operator to the delta variances.
    """
    v = np.asarray(static_var_seq, dtype=np.float64)
    if v.shape[0] == 0:
        raise EmptyInput("Cannot propagate variances of an empty sequence")

    def _propagate(seq: np.ndarray) -> np.ndarray:
        n_frames = seq.shape[0]
        padded = np.pad(seq, [(n, n)] + [(0, 0)] * (seq.ndim - 1), mode='edge')
        denom = (2.0 * sum(k * k for k in range(1, n + 1))) ** 2
        out = np.zeros_like(seq)
        for k in range(1, n + 1):
            out += k * k * (padded[n + k:n + k + n_frames] + padded[n - k:n - k + n_frames])
        return out / denom

    delta_var = _propagate(v)
    return delta_var, _propagate(delta_var)


def mse_uncertainty(clean_static: np.ndarray, enhanced_static: np.ndarray) -> ArrayLike:
    """
    Oracle uncertainty UV_t = mean over the NS statics of (clean - enhanced)^2.

    Accepts one frame (NS,) -> float, or (T, NS) -> (T,).
    """
    clean = np.asarray(clean_static, dtype=np.float64)
    enhanced = np.asarray(enhanced_static, dtype=np.float64)
    if clean.shape != enhanced.shape:
        raise DimMismatch(f"Clean statics {clean.shape} vs enhanced statics {enhanced.shape}")
    uv = np.mean((clean - enhanced) ** 2, axis=-1)
    return float(uv) if np.ndim(uv) == 0 else uv


def window_uv(uv_seq: np.ndarray, half_width: int = 5) -> np.ndarray:
    """Mean of UV over [t-L, t+L], boundary values replicated"""
    uv = np.asarray(uv_seq, dtype=np.float64)
    if half_width == 0:
        return uv.copy()
    return uniform_filter1d(uv, size=2 * half_width + 1, mode='nearest')


def uncertainty_weight(uv: ArrayLike, params: WeightingParams) -> ArrayLike:
    """
    Weight in (0, 1]: 1 up to Th, then Th / (K (uv - Th) + Th).
    """
    u = np.asarray(uv, dtype=np.float64)
    th, k = params.th, params.k
    if np.isinf(th):
        weight = np.ones_like(u)
    else:
        with np.errstate(over='ignore'):
            weight = np.where(u <= th, 1.0, th / (k * (u - th) + th))
    return float(weight) if weight.ndim == 0 else weight


def model_uv_scalar(variances: np.ndarray) -> ArrayLike:
    """Average per-filter variances into one value per frame"""
    v = np.asarray(variances, dtype=np.float64)
    if v.shape[-1] == 0:
        raise EmptyInput("Variance vector is empty")
    avg = v.mean(axis=-1)
    return float(avg) if np.ndim(avg) == 0 else avg
