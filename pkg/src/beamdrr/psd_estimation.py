"""Direct and reverberant PSDs from two beamformer output PSDs.

Each beamformer's output PSD is a known linear mixture of the direct
sound's PSD and the (assumed isotropic) reverberation's angular PSD
density: the mixing coefficients are its gain at the source direction and
its full-sphere integrated gain.  Stacking two beamformers gives a 2x2
system per bin, solved by direct inversion.

The predecessor estimator that requires the two beampatterns to share the
same integrated gain is also provided; it is the special case where the
output-PSD difference cancels the reverberant term.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .beamforming import (
    BeamformerWeights,
    FULL_SPHERE,
    SphericalQuadrature,
    beam_gain_spectrum,
    integrated_gain_spectrum,
)
from .errors import ConfigError, DegenerateBeamspaceError
from .geometry import ArrayGeometry, SolidAngle

DEFAULT_COND_THRESHOLD = 1e3
DEFAULT_LOOK_OFFSET = math.pi / 3


class BinFlag(enum.IntEnum):
    OK = 0
    CLAMPED = 1
    ILL_CONDITIONED = 2


@dataclass(frozen=True)
class GainMatrix:
    """Per-bin 2x2 mixing matrix [[g_l(source), integral of g_l]] and its
    condition number."""

    entries: np.ndarray  # (bins, 2, 2)
    cond: np.ndarray  # (bins,)
    omegas: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 3 or e.shape[1:] != (2, 2):
            raise ConfigError(f"entries must be (bins, 2, 2), got {e.shape}")
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "cond", np.asarray(self.cond, dtype=float))
        object.__setattr__(self, "omegas", np.asarray(self.omegas, dtype=float))

    @property
    def n_bins(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class PsdPair:
    """Per-bin direct PSD and reverberant angular PSD density, with flags.

    ``direct``/``reverb`` are clamped to be nonnegative;
    ``raw_direct``/``raw_reverb`` keep the unclamped solutions (NaN on
    ill-conditioned bins).  Ill-conditioned bins are excluded from all
    downstream sums; clamped bins stay in with their clamped values.
    """

    direct: np.ndarray
    reverb: np.ndarray
    flags: np.ndarray
    raw_direct: np.ndarray
    raw_reverb: np.ndarray

    @property
    def usable(self) -> np.ndarray:
        return self.flags != BinFlag.ILL_CONDITIONED

    @property
    def n_bins(self) -> int:
        return self.direct.shape[0]


def _condition_numbers(entries: np.ndarray) -> np.ndarray:
    s = np.linalg.svd(entries, compute_uv=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = s[:, 0] / s[:, 1]
    return np.where(np.isnan(cond), np.inf, cond)


def build_gain_matrix(
    w1: BeamformerWeights,
    w2: BeamformerWeights,
    source_direction: SolidAngle,
    geom: ArrayGeometry,
    quad: SphericalQuadrature,
) -> GainMatrix:
    """Assemble the per-bin 2x2 system for two beamformers.

    Row l holds the gain of beamformer l at the source direction and its
    integrated gain over the sphere.  Singular bins are not an error
    here; they are flagged when the system is solved.
    """
    if w1.omegas.shape != w2.omegas.shape or not np.allclose(w1.omegas, w2.omegas):
        raise ConfigError("both beamformers must share the same bins")
    if w1.n_channels != w2.n_channels or w1.n_channels != geom.n_channels:
        raise ConfigError("beamformers and geometry must share the channel count")
    entries = np.empty((w1.omegas.shape[0], 2, 2))
    entries[:, 0, 0] = beam_gain_spectrum(w1, geom, source_direction)
    entries[:, 1, 0] = beam_gain_spectrum(w2, geom, source_direction)
    entries[:, 0, 1] = integrated_gain_spectrum(w1, geom, quad)
    entries[:, 1, 1] = integrated_gain_spectrum(w2, geom, quad)
    return GainMatrix(entries=entries, cond=_condition_numbers(entries), omegas=w1.omegas)


def solve_psd(
    output_psds: np.ndarray,
    gm: GainMatrix,
    cond_threshold: float = DEFAULT_COND_THRESHOLD,
) -> PsdPair:
    """Invert the 2x2 system per bin.

    ``output_psds`` is (bins, 2): the two beamformer output PSDs.  Bins
    whose condition number exceeds ``cond_threshold`` are flagged
    ill-conditioned and zeroed; negative solutions are clamped to zero
    and flagged.  Raises when no bin is usable.
    """
    pbf = np.asarray(output_psds, dtype=float)
    if pbf.shape != (gm.n_bins, 2):
        raise ConfigError(f"output_psds must be (bins, 2), got {pbf.shape}")
    if np.any(pbf < 0):
        raise ConfigError("beamformer output PSDs must be nonnegative")

    usable = np.isfinite(gm.cond) & (gm.cond <= cond_threshold)
    if not usable.any():
        raise DegenerateBeamspaceError(
            "beamspace degenerate: every bin is ill-conditioned"
        )

    raw_direct = np.full(gm.n_bins, np.nan)
    raw_reverb = np.full(gm.n_bins, np.nan)
    a = gm.entries[usable, 0, 0]
    b = gm.entries[usable, 0, 1]
    c = gm.entries[usable, 1, 0]
    d = gm.entries[usable, 1, 1]
    det = a * d - b * c
    p1 = pbf[usable, 0]
    p2 = pbf[usable, 1]
    raw_direct[usable] = (d * p1 - b * p2) / det
    raw_reverb[usable] = (-c * p1 + a * p2) / det

    return _clamp_and_flag(raw_direct, raw_reverb, usable)


def identical_beampattern_psd(
    psd1: np.ndarray,
    psd2: np.ndarray,
    gain1: np.ndarray,
    gain2: np.ndarray,
    mic_psd: np.ndarray,
    cond_threshold: float = DEFAULT_COND_THRESHOLD,
) -> PsdPair:
    """Predecessor estimator for beamformers with identical beampatterns.

    Valid when the two integrated gains are equal but the gains at the
    source direction differ: the PSD difference then isolates the direct
    sound, and subtracting it from one microphone's PSD leaves the total
    reverberant PSD.  The total is divided by 4*pi so the result is on
    the same angular-density scale as :func:`solve_psd`.

    Bins where the gain difference is too small to divide by safely
    (relative to the gains' magnitude, same spirit as the condition
    threshold of the 2x2 solve) are flagged ill-conditioned.
    """
    psd1, psd2, gain1, gain2, mic_psd = (
        np.asarray(v, dtype=float) for v in (psd1, psd2, gain1, gain2, mic_psd)
    )
    n = psd1.shape[0]
    if any(v.shape != (n,) for v in (psd2, gain1, gain2, mic_psd)):
        raise ConfigError("all per-bin inputs must share one shape")

    denom = gain1 - gain2
    usable = np.abs(denom) * cond_threshold > np.abs(gain1) + np.abs(gain2)
    if not usable.any():
        raise DegenerateBeamspaceError(
            "beamspace degenerate: beamformer gains coincide at every bin"
        )

    raw_direct = np.full(n, np.nan)
    raw_reverb = np.full(n, np.nan)
    raw_direct[usable] = (psd1[usable] - psd2[usable]) / denom[usable]
    raw_reverb[usable] = (mic_psd[usable] - raw_direct[usable]) / FULL_SPHERE

    return _clamp_and_flag(raw_direct, raw_reverb, usable)


def _clamp_and_flag(
    raw_direct: np.ndarray, raw_reverb: np.ndarray, usable: np.ndarray
) -> PsdPair:
    n = raw_direct.shape[0]
    flags = np.full(n, BinFlag.ILL_CONDITIONED, dtype=np.int8)
    flags[usable] = BinFlag.OK
    clamped = usable & ((raw_direct < 0) | (raw_reverb < 0))
    flags[clamped] = BinFlag.CLAMPED

    direct = np.zeros(n)
    reverb = np.zeros(n)
    direct[usable] = np.maximum(raw_direct[usable], 0.0)
    reverb[usable] = np.maximum(raw_reverb[usable], 0.0)
    return PsdPair(
        direct=direct,
        reverb=reverb,
        flags=flags,
        raw_direct=raw_direct,
        raw_reverb=raw_reverb,
    )
