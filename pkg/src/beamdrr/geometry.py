"""Array geometry, solid angles, plane-wave delays, and steering vectors.

Conventions used throughout the package:

* Cartesian mic positions in meters, relative to the array reference
  point.  The reference point is always the centroid of the array; the
  constructor re-centers whatever positions it is given.
* A solid angle is an (azimuth, zenith) pair in radians.  Zenith pi/2 is
  the plane parallel to the array plane; zenith 0 points straight up.
* d(angle) is the unit vector pointing from the array toward the source.
  A microphone displaced toward the source receives the wavefront before
  the reference point, so its propagation delay is negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

DEFAULT_SPEED_OF_SOUND = 343.0

# Bundled 3-channel array: right-angled triangle with legs along x and y.
# The leg lengths are a documented default, not measured hardware; override
# them with a geometry config file when working with a real array.
DEFAULT_TRIANGLE_MICS = (
    (0.0, 0.0, 0.0),
    (0.05, 0.0, 0.0),
    (0.0, 0.045, 0.0),
)

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SolidAngle:
    """Direction given as azimuth in [0, 2*pi) and zenith in [0, pi]."""

    azimuth: float
    zenith: float

    def __post_init__(self):
        zenith = float(self.zenith)
        if not math.isfinite(zenith) or not 0.0 <= zenith <= math.pi:
            raise ConfigError(f"zenith must lie in [0, pi], got {zenith!r}")
        azimuth = float(self.azimuth)
        if not math.isfinite(azimuth):
            raise ConfigError(f"azimuth must be finite, got {azimuth!r}")
        object.__setattr__(self, "azimuth", azimuth % _TWO_PI)
        object.__setattr__(self, "zenith", zenith)

    def unit_vector(self) -> np.ndarray:
        """Unit vector pointing from the array toward this direction."""
        sz = math.sin(self.zenith)
        return np.array([
            sz * math.cos(self.azimuth),
            sz * math.sin(self.azimuth),
            math.cos(self.zenith),
        ])

    @classmethod
    def from_unit_vector(cls, v) -> "SolidAngle":
        v = np.asarray(v, dtype=float)
        norm = np.linalg.norm(v)
        if not np.isclose(norm, 1.0, atol=1e-6):
            raise ConfigError(f"direction vector must have unit norm, got {norm}")
        zenith = math.acos(float(np.clip(v[2] / norm, -1.0, 1.0)))
        azimuth = math.atan2(float(v[1]), float(v[0]))
        return cls(azimuth=azimuth, zenith=zenith)

    def offset_azimuth(self, delta: float) -> "SolidAngle":
        return SolidAngle(self.azimuth + delta, self.zenith)


@dataclass(frozen=True)
class ArrayGeometry:
    """Microphone positions (meters) re-centered on their centroid.

    Immutable after construction; the position array is marked read-only
    so instances can be shared freely across workers.
    """

    mic_positions: np.ndarray
    speed_of_sound: float = DEFAULT_SPEED_OF_SOUND

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.mic_positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ConfigError(
                f"mic positions must be an (M, 3) array, got shape {pos.shape}"
            )
        if pos.shape[0] < 1:
            raise ConfigError("need at least one microphone")
        if not np.all(np.isfinite(pos)):
            raise ConfigError("mic positions must be finite")
        if not self.speed_of_sound > 0:
            raise ConfigError(f"speed_of_sound must be > 0, got {self.speed_of_sound}")
        pos = pos - pos.mean(axis=0)
        pos.flags.writeable = False
        object.__setattr__(self, "mic_positions", pos)
        object.__setattr__(self, "speed_of_sound", float(self.speed_of_sound))

    @property
    def n_channels(self) -> int:
        return self.mic_positions.shape[0]


def propagation_delays(geom: ArrayGeometry, angle: SolidAngle) -> np.ndarray:
    """Per-channel plane-wave delays in seconds, relative to the reference.

    delay_m = -(r_m . d(angle)) / c: microphones displaced toward the
    source see the wavefront earlier than the array centroid.
    """
    d = angle.unit_vector()
    return -(geom.mic_positions @ d) / geom.speed_of_sound


def delay_matrix(geom: ArrayGeometry, unit_vectors: np.ndarray) -> np.ndarray:
    """Delays for many directions at once; rows follow ``unit_vectors``."""
    return -(unit_vectors @ geom.mic_positions.T) / geom.speed_of_sound


def steering_vector(geom: ArrayGeometry, angle: SolidAngle, omega: float) -> np.ndarray:
    """Complex phase vector exp(-j*omega*delay_m) of unit-modulus entries.

    ``omega`` is angular frequency in rad/s; omega = 0 yields all ones.
    """
    if omega < 0:
        raise ConfigError(f"omega must be >= 0, got {omega}")
    return np.exp(-1j * omega * propagation_delays(geom, angle))


def steering_matrix(geom: ArrayGeometry, angle: SolidAngle, omegas: np.ndarray) -> np.ndarray:
    """Steering vectors for all bins: shape (len(omegas), M)."""
    omegas = np.asarray(omegas, dtype=float)
    delays = propagation_delays(geom, angle)
    return np.exp(-1j * np.outer(omegas, delays))


def parse_angle(value) -> float:
    """Angle from a config or CLI value: radians, or degrees with a suffix.

    Accepts plain numbers (radians) and strings like "45deg" or "0.5rad".
    """
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip().lower()
    try:
        if text.endswith("deg"):
            return math.radians(float(text[:-3]))
        if text.endswith("rad"):
            return float(text[:-3])
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse angle {value!r}") from exc


def load_geometry(path) -> ArrayGeometry:
    """Read an array description from a TOML file.

    Keys: ``mics`` (list of [x, y, z] in meters, required) and
    ``speed_of_sound`` (m/s, optional, default 343.0).
    """
    import tomli

    try:
        with open(path, "rb") as fh:
            cfg = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse geometry file {path}: {exc}") from exc
    mics = cfg.get("mics")
    if mics is None:
        raise ConfigError(f"geometry file {path} is missing the 'mics' key")
    try:
        positions = np.asarray(mics, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"geometry file {path}: 'mics' must be [[x,y,z], ...]") from exc
    speed = cfg.get("speed_of_sound", DEFAULT_SPEED_OF_SOUND)
    if not isinstance(speed, (int, float)):
        raise ConfigError(f"geometry file {path}: speed_of_sound must be a number")
    return ArrayGeometry(mic_positions=positions, speed_of_sound=float(speed))


def default_geometry(speed_of_sound: float = DEFAULT_SPEED_OF_SOUND) -> ArrayGeometry:
    """The bundled 3-channel right-angled-triangle array."""
    return ArrayGeometry(
        mic_positions=np.array(DEFAULT_TRIANGLE_MICS),
        speed_of_sound=speed_of_sound,
    )
