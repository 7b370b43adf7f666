"""WAV reading and writing with fixed conventions.

Samples are float64 in [-1, 1], shaped (n_samples, n_channels).  Integer
PCM is scaled by its full-scale value on read; files are written as
32-bit float.  No resampling anywhere: rate mismatches are the caller's
problem to reject.
"""

from __future__ import annotations

import numpy as np
import scipy.io.wavfile

from .errors import InputDataError

_INT_SCALES = {np.dtype(np.int16): 32768.0, np.dtype(np.int32): 2147483648.0}


def read_wav(path):
    """Returns (samples, sample_rate); samples are (n, channels) float64."""
    try:
        rate, data = scipy.io.wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise InputDataError(f"cannot read WAV file {path}: {exc}") from exc
    if data.ndim == 1:
        data = data[:, None]
    if data.dtype in _INT_SCALES:
        samples = data.astype(np.float64) / _INT_SCALES[data.dtype]
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    else:
        raise InputDataError(f"unsupported WAV sample format {data.dtype} in {path}")
    return samples, float(rate)


def write_wav(path, samples: np.ndarray, sample_rate: float) -> None:
    """Write (n, channels) samples as 32-bit float PCM."""
    samples = np.asarray(samples)
    if samples.ndim == 1:
        samples = samples[:, None]
    scipy.io.wavfile.write(path, int(round(sample_rate)), samples.astype(np.float32))
