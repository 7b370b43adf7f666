"""Source direction by steered-response-power grid search.

A delay-and-sum beamformer is steered at every grid point; the point with
the largest band-summed output power over the voice-active frames wins.
Exhaustive single-pass search: the grid (about 144 x 61 points at the
default steps) times the band is small enough that simplicity beats a
coarse-to-fine scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, VadError
from .geometry import ArrayGeometry, SolidAngle, delay_matrix

DEFAULT_AZIMUTH_STEP = math.pi / 72
DEFAULT_ZENITH_STEP = math.pi / 60
DEFAULT_SRP_BAND_HZ = (300.0, 5500.0)

# relative spread below which the response surface counts as flat
_FLAT_RTOL = 1e-12


@dataclass(frozen=True)
class DoaGrid:
    """Search grid over the full azimuth circle and zenith range [0, pi].

    Steps are snapped to the nearest exact divisor of their range so the
    grid tiles without a duplicate point at azimuth 2*pi.
    """

    azimuth_step: float = DEFAULT_AZIMUTH_STEP
    zenith_step: float = DEFAULT_ZENITH_STEP

    def __post_init__(self):
        if not self.azimuth_step > 0 or not self.zenith_step > 0:
            raise ConfigError("grid steps must be > 0")

    def azimuths(self) -> np.ndarray:
        n = max(1, round(2.0 * math.pi / self.azimuth_step))
        return 2.0 * math.pi * np.arange(n) / n

    def zeniths(self) -> np.ndarray:
        n = max(1, round(math.pi / self.zenith_step))
        return np.linspace(0.0, math.pi, n + 1)


@dataclass(frozen=True)
class DoaEstimate:
    angle: SolidAngle
    peak_power: float
    non_informative: bool = False


def estimate_doa(
    spec,
    geom: ArrayGeometry,
    grid: DoaGrid,
    mask,
    band: np.ndarray,
) -> DoaEstimate:
    """Grid point maximizing the steered DAS output power over ``band``.

    Ties (a flat response surface, e.g. with a single channel) resolve to
    the smallest (zenith, azimuth) pair and set ``non_informative``.
    """
    band = np.asarray(band, dtype=int)
    if band.size == 0:
        raise ConfigError("empty frequency band for direction search")
    active = np.asarray(mask.active, dtype=bool)
    if active.shape[0] != spec.n_frames:
        raise ConfigError("mask length does not match frame count")
    if not active.any():
        raise VadError("no active frames")

    x = spec.data[:, band][:, :, active]  # (channels, band bins, frames)
    n_active = x.shape[2]
    corr = np.einsum("mkt,nkt->kmn", x, x.conj()) / n_active

    zeniths = grid.zeniths()
    azimuths = grid.azimuths()
    # zenith-major ordering realizes the smallest-(zenith, azimuth) tie-break
    sin_zen = np.sin(zeniths)
    cos_zen = np.cos(zeniths)
    u = np.empty((zeniths.size * azimuths.size, 3))
    u[:, 0] = np.outer(sin_zen, np.cos(azimuths)).ravel()
    u[:, 1] = np.outer(sin_zen, np.sin(azimuths)).ravel()
    u[:, 2] = np.repeat(cos_zen, azimuths.size)
    delays = delay_matrix(geom, u)  # (points, channels)

    omegas = spec.bin_omegas[band]
    response = np.zeros(u.shape[0])
    for k, omega in enumerate(omegas):
        a = np.exp(-1j * omega * delays)
        response += np.einsum("gm,mn,gn->g", a.conj(), corr[k], a).real
    response /= geom.n_channels**2

    peak = response.max()
    spread = peak - response.min()
    tol = _FLAT_RTOL * max(abs(peak), np.finfo(float).tiny)
    best = int(np.argmax(response >= peak - tol))  # first of the near-ties
    zen_idx, az_idx = divmod(best, azimuths.size)
    return DoaEstimate(
        angle=SolidAngle(azimuth=float(azimuths[az_idx]), zenith=float(zeniths[zen_idx])),
        peak_power=float(response[best]),
        non_informative=bool(spread <= tol),
    )
