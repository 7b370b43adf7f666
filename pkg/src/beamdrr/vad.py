"""Threshold voice activity detection against a percentile noise floor.

The PSD expectation should only average frames that actually contain the
source, so frames are kept when their broadband power exceeds the
estimated stationary-noise power by a configurable margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, VadError

DEFAULT_PERCENTILE = 20.0
DEFAULT_MARGIN_DB = 10.0
DEFAULT_MIN_FRAMES = 10
MIN_FLOOR_FRAMES = 10


@dataclass(frozen=True)
class VadMask:
    """Boolean frame-selection mask."""

    active: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.active, dtype=bool)
        a.flags.writeable = False
        object.__setattr__(self, "active", a)

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    def __len__(self) -> int:
        return self.active.shape[0]

    @classmethod
    def all_active(cls, n_frames: int) -> "VadMask":
        return cls(active=np.ones(n_frames, dtype=bool))


def estimate_noise_floor(
    spec, channel: int = 0, percentile: float = DEFAULT_PERCENTILE
) -> np.ndarray:
    """Per-bin stationary-noise PSD from a low percentile over frames.

    The raw percentile of |X|^2 underestimates the noise PSD (for
    complex-Gaussian bins |X|^2 is exponential, whose q-quantile sits at
    -ln(1-q) of the mean), so the result is divided by that factor to be
    unbiased on stationary noise.  Sparse loud events occupying less than
    ``percentile`` percent of frames leave the estimate untouched.
    """
    if not 0 < percentile < 100:
        raise ConfigError(f"percentile must be in (0, 100), got {percentile}")
    if spec.n_frames < MIN_FLOOR_FRAMES:
        raise VadError(
            f"too few frames for noise floor: {spec.n_frames} < {MIN_FLOOR_FRAMES}"
        )
    power = np.abs(spec.data[channel]) ** 2  # (bins, frames)
    quantile = np.percentile(power, percentile, axis=1)
    correction = -math.log1p(-percentile / 100.0)
    return quantile / correction


def compute_mask(
    spec,
    channel: int = 0,
    floor: np.ndarray | None = None,
    margin_db: float = DEFAULT_MARGIN_DB,
    min_frames: int = DEFAULT_MIN_FRAMES,
) -> VadMask:
    """Frames whose broadband power exceeds the summed floor by ``margin_db``.

    The threshold is multiplicative, so rescaling the input rescales the
    floor identically and the mask is unchanged.
    """
    if floor is None:
        floor = estimate_noise_floor(spec, channel=channel)
    floor = np.asarray(floor, dtype=float)
    if floor.shape != (spec.n_bins,):
        raise ConfigError("noise floor shape does not match spectrogram bins")
    frame_power = np.sum(np.abs(spec.data[channel]) ** 2, axis=0)
    threshold = floor.sum() * 10.0 ** (margin_db / 10.0)
    active = frame_power > threshold
    n_active = int(active.sum())
    if n_active < min_frames:
        raise VadError(
            f"VAD selected too few frames: {n_active} < {min_frames} "
            f"(margin {margin_db} dB)"
        )
    return VadMask(active=active)
