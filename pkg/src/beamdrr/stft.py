"""Short-time Fourier analysis of multichannel signals.

Produces the complex time-frequency observation the rest of the pipeline
works on.  One-sided spectra only; there is no resynthesis path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .errors import ConfigError, InputDataError

DEFAULT_SAMPLE_RATE = 16000.0
DEFAULT_FRAME_SIZE = 512
DEFAULT_HOP = 256

_WINDOW_NAMES = {"hann": "hann", "rect": "boxcar"}


def window_samples(window_id: str, frame_size: int) -> np.ndarray:
    if window_id not in _WINDOW_NAMES:
        raise ConfigError(
            f"unknown window {window_id!r}; choose from {sorted(_WINDOW_NAMES)}"
        )
    return scipy.signal.get_window(_WINDOW_NAMES[window_id], frame_size)


def one_sided_bin_weights(frame_size: int) -> np.ndarray:
    """Multiplicity of each one-sided bin in the full spectrum.

    2.0 for interior bins, 1.0 for DC and (even frame sizes) Nyquist;
    with these weights sum_k w_k |X_k|^2 / N equals the energy of the
    windowed frame.
    """
    n_bins = frame_size // 2 + 1
    w = np.full(n_bins, 2.0)
    w[0] = 1.0
    if frame_size % 2 == 0:
        w[-1] = 1.0
    return w


@dataclass(frozen=True)
class MultichannelSpectrogram:
    """Complex STFT tensor indexed [channel, bin, frame] plus framing metadata."""

    data: np.ndarray
    sample_rate: float
    frame_size: int
    hop: int
    window_id: str

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ConfigError(f"data must be (channels, bins, frames), got {data.shape}")
        if not self.sample_rate > 0:
            raise ConfigError(f"sample_rate must be > 0, got {self.sample_rate}")
        if not 0 < self.hop <= self.frame_size:
            raise ConfigError(f"hop must satisfy 0 < hop <= frame_size, got {self.hop}")
        expected_bins = self.frame_size // 2 + 1
        if data.shape[1] != expected_bins:
            raise ConfigError(
                f"bin count {data.shape[1]} does not match frame_size {self.frame_size}"
            )
        if self.window_id not in _WINDOW_NAMES:
            raise ConfigError(f"unknown window {self.window_id!r}")
        object.__setattr__(self, "data", data)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]

    @property
    def n_frames(self) -> int:
        return self.data.shape[2]

    @property
    def bin_freqs_hz(self) -> np.ndarray:
        return np.fft.rfftfreq(self.frame_size, d=1.0 / self.sample_rate)

    @property
    def bin_omegas(self) -> np.ndarray:
        """Angular frequency (rad/s) of each bin."""
        return 2.0 * math.pi * self.bin_freqs_hz

    def band_bins(self, low_hz: float, high_hz: float, include_edges: bool = False) -> np.ndarray:
        """Indices of bins with low_hz <= f <= high_hz.

        DC and Nyquist are dropped unless ``include_edges`` is set; the
        estimators never use them by default.
        """
        freqs = self.bin_freqs_hz
        mask = (freqs >= low_hz) & (freqs <= high_hz)
        if not include_edges:
            mask[0] = False
            mask[-1] = False
        return np.nonzero(mask)[0]


def analyze(
    signal,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    frame_size: int = DEFAULT_FRAME_SIZE,
    hop: int = DEFAULT_HOP,
    window_id: str = "hann",
) -> MultichannelSpectrogram:
    """Windowed one-sided DFT of every frame of every channel.

    ``signal`` is (samples,) or (samples, channels).  Frames start every
    ``hop`` samples; a trailing partial frame is dropped.
    """
    if isinstance(signal, (list, tuple)):
        lengths = {np.asarray(ch).shape for ch in signal}
        if len(lengths) > 1:
            raise InputDataError("channel length mismatch")
        signal = np.column_stack([np.asarray(ch, dtype=float) for ch in signal])
    x = np.asarray(signal, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise InputDataError(f"signal must be 1-D or (samples, channels), got shape {x.shape}")
    n_samples = x.shape[0]
    if not 0 < hop <= frame_size:
        raise ConfigError(f"hop must satisfy 0 < hop <= frame_size, got {hop}")
    if n_samples < frame_size:
        raise InputDataError(
            f"insufficient samples: {n_samples} < frame_size {frame_size}"
        )
    win = window_samples(window_id, frame_size)
    n_frames = (n_samples - frame_size) // hop + 1
    # (frames, channels, frame_size) view, then windowed rFFT along time
    frames = np.lib.stride_tricks.sliding_window_view(x, frame_size, axis=0)[::hop]
    spectra = np.fft.rfft(frames * win, axis=-1)
    data = np.ascontiguousarray(np.transpose(spectra, (1, 2, 0)))
    assert data.shape[2] == n_frames
    return MultichannelSpectrogram(
        data=data,
        sample_rate=float(sample_rate),
        frame_size=frame_size,
        hop=hop,
        window_id=window_id,
    )
