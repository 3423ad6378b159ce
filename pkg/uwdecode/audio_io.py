"""WAV reading and writing"""
import logging

import numpy as np
import soundfile as sf

from uwdecode.errors import IoError
from uwdecode.frontend import AudioSignal

logger = logging.getLogger(__name__)


def read_wav(path: str) -> AudioSignal:
    """Read a mono WAV file as float samples in [-1, 1]"""
    try:
        samples, sample_rate = sf.read(path, dtype='float64', always_2d=False)
    except (RuntimeError, OSError) as e:
        raise IoError(f"Could not read {path}: {e}") from e
    if samples.ndim != 1:
        raise IoError(f"{path} has {samples.shape[1]} channels, expected mono")
    return AudioSignal(samples=samples, sample_rate=int(sample_rate))


def write_wav(path: str, signal: AudioSignal):
    """Write 16-bit PCM, clipping to [-1, 1]"""
    clipped = np.clip(signal.samples, -1.0, 1.0)
    n_clipped = int(np.sum(np.abs(signal.samples) > 1.0))
    if n_clipped:
        logger.warning(f"Clipped {n_clipped} sample(s) writing {path}")
    try:
        sf.write(path, clipped, signal.sample_rate, subtype='PCM_16')
    except (RuntimeError, OSError) as e:
        raise IoError(f"Could not write {path}: {e}") from e
