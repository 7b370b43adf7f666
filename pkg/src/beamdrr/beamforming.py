"""Delay-and-sum beamformers, directional gains, and output PSDs.

The gain of a beamformer toward a direction is |w^H a|^2; integrating it
over the full sphere gives its sensitivity to an isotropic field.  Both
quantities depend only on geometry, look direction, and frequency, so
callers typically evaluate them once per bin and reuse the tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputDataError, VadError
from .geometry import ArrayGeometry, SolidAngle, delay_matrix, steering_matrix

FULL_SPHERE = 4.0 * math.pi

DEFAULT_ZENITH_NODES = 24
DEFAULT_AZIMUTH_NODES = 48


@dataclass(frozen=True)
class BeamformerWeights:
    """Per-bin complex weight vectors, distortionless at the look direction."""

    weights: np.ndarray  # (bins, channels)
    omegas: np.ndarray  # rad/s, one per bin
    look: SolidAngle

    def __post_init__(self):
        w = np.asarray(self.weights)
        om = np.asarray(self.omegas, dtype=float)
        if w.ndim != 2 or w.shape[0] != om.shape[0]:
            raise ConfigError(
                f"weights must be (bins, channels) matching omegas, got {w.shape}"
            )
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "omegas", om)

    @property
    def n_channels(self) -> int:
        return self.weights.shape[1]

    def bin_index(self, omega: float) -> int:
        idx = int(np.argmin(np.abs(self.omegas - omega)))
        if not math.isclose(self.omegas[idx], omega, rel_tol=1e-9, abs_tol=1e-6):
            raise ConfigError(f"omega {omega} is not an analyzed bin")
        return idx


@dataclass(frozen=True)
class SphericalQuadrature:
    """Node directions and positive weights summing to the full sphere."""

    unit_vectors: np.ndarray  # (nodes, 3)
    weights: np.ndarray  # (nodes,)

    def __post_init__(self):
        u = np.asarray(self.unit_vectors, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if u.ndim != 2 or u.shape[1] != 3 or u.shape[0] != w.shape[0]:
            raise ConfigError("quadrature needs matching (nodes, 3) vectors and weights")
        if np.any(w <= 0):
            raise ConfigError("quadrature weights must be positive")
        if abs(w.sum() - FULL_SPHERE) > 1e-9:
            raise ConfigError("quadrature weights must sum to 4*pi")
        u.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "unit_vectors", u)
        object.__setattr__(self, "weights", w)

    @classmethod
    def product_rule(
        cls,
        n_zenith: int = DEFAULT_ZENITH_NODES,
        n_azimuth: int = DEFAULT_AZIMUTH_NODES,
    ) -> "SphericalQuadrature":
        """Gauss-Legendre nodes in cos(zenith) times a uniform azimuth rule.

        Spectrally accurate for smooth integrands such as |w^H a|^2; the
        weights are rescaled so they sum to 4*pi exactly.
        """
        if n_zenith < 1 or n_azimuth < 1:
            raise ConfigError("quadrature needs at least one node per axis")
        nodes, gl_weights = np.polynomial.legendre.leggauss(n_zenith)
        cos_zen = nodes  # integrate over u = cos(zenith) in [-1, 1]
        sin_zen = np.sqrt(1.0 - cos_zen**2)
        azimuths = 2.0 * math.pi * np.arange(n_azimuth) / n_azimuth
        ca, sa = np.cos(azimuths), np.sin(azimuths)
        u = np.empty((n_zenith * n_azimuth, 3))
        u[:, 0] = np.outer(sin_zen, ca).ravel()
        u[:, 1] = np.outer(sin_zen, sa).ravel()
        u[:, 2] = np.repeat(cos_zen, n_azimuth)
        w = np.repeat(gl_weights, n_azimuth) * (2.0 * math.pi / n_azimuth)
        w *= FULL_SPHERE / w.sum()
        return cls(unit_vectors=u, weights=w)

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]


def das_weights(geom: ArrayGeometry, look: SolidAngle, omegas) -> BeamformerWeights:
    """Phase-align-and-average weights: w(omega) = a_look(omega) / M.

    The normalization makes the gain at the look direction exactly 1 at
    every bin.
    """
    omegas = np.asarray(omegas, dtype=float)
    a = steering_matrix(geom, look, omegas)
    return BeamformerWeights(weights=a / geom.n_channels, omegas=omegas, look=look)


def beam_gain(
    w: BeamformerWeights, geom: ArrayGeometry, angle: SolidAngle, omega: float
) -> float:
    """|w^H a_angle|^2 at one analyzed bin; in [0, 1] for DAS weights."""
    k = w.bin_index(omega)
    a = steering_matrix(geom, angle, np.array([omega]))[0]
    return float(np.abs(np.vdot(w.weights[k], a)) ** 2)


def beam_gain_spectrum(
    w: BeamformerWeights, geom: ArrayGeometry, angle: SolidAngle
) -> np.ndarray:
    """Gain toward ``angle`` at every bin of ``w``."""
    a = steering_matrix(geom, angle, w.omegas)
    return np.abs(np.einsum("km,km->k", w.weights.conj(), a)) ** 2


def integrated_gain(
    w: BeamformerWeights,
    geom: ArrayGeometry,
    omega: float,
    quad: SphericalQuadrature,
) -> float:
    """Full-sphere integral of the gain at one bin; in (0, 4*pi] for DAS."""
    k = w.bin_index(omega)
    delays = delay_matrix(geom, quad.unit_vectors)
    a = np.exp(-1j * omega * delays)  # (nodes, channels)
    gains = np.abs(a @ w.weights[k].conj()) ** 2
    return float(gains @ quad.weights)


def integrated_gain_spectrum(
    w: BeamformerWeights, geom: ArrayGeometry, quad: SphericalQuadrature
) -> np.ndarray:
    """Full-sphere gain integral at every bin of ``w``."""
    delays = delay_matrix(geom, quad.unit_vectors)  # (nodes, channels)
    out = np.empty(w.omegas.shape[0])
    for k, omega in enumerate(w.omegas):
        a = np.exp(-1j * omega * delays)
        gains = np.abs(a @ w.weights[k].conj()) ** 2
        out[k] = gains @ quad.weights
    return out


def apply_beamformer(spec, w: BeamformerWeights) -> np.ndarray:
    """Beamformer output w^H x per bin per frame; returns (bins, frames)."""
    if spec.n_channels != w.n_channels:
        raise InputDataError(
            f"channel mismatch: spectrogram has {spec.n_channels}, weights {w.n_channels}"
        )
    if spec.n_bins != w.omegas.shape[0] or not np.allclose(spec.bin_omegas, w.omegas):
        raise ConfigError("beamformer weights were built for different bins")
    return np.einsum("km,mkt->kt", w.weights.conj(), spec.data)


def output_psd(channel: np.ndarray, mask) -> np.ndarray:
    """Per-bin mean of |Y|^2 over the mask's active frames."""
    y = np.asarray(channel)
    if y.ndim != 2:
        raise ConfigError(f"expected (bins, frames), got shape {y.shape}")
    active = np.asarray(mask.active, dtype=bool)
    if active.shape[0] != y.shape[1]:
        raise ConfigError("mask length does not match frame count")
    if not active.any():
        raise VadError("no active frames")
    return np.mean(np.abs(y[:, active]) ** 2, axis=1)
