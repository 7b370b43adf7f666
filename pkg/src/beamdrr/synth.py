"""Synthetic multichannel scenes with a known direct/reverberant ratio.

A scene is a coherent plane wave from one direction plus an isotropic
diffuse field built from many independent plane waves on a deterministic
spherical point set, scaled so the energy ratio at the array reference
point hits the requested target.  Optional stationary white sensor noise
can be added on top.  Because the ratio is realized by explicit energy
bookkeeping, scenes double as oracles for the estimation pipeline.

The diffuse construction keeps the source's temporal envelope and
spectral shape per direction but draws independent fine structure, so
the field is uncorrelated with the direct path and across directions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import ArrayGeometry, SolidAngle, delay_matrix, propagation_delays
from .stft import DEFAULT_FRAME_SIZE, DEFAULT_HOP

DEFAULT_DIFFUSE_DIRECTIONS = 256
MIN_DIFFUSE_DIRECTIONS = 32
SOURCE_KINDS = ("white", "bursts", "wav")

# speech-shaped burst source: first-order spectral tilt corner and gating
TILT_CORNER_HZ = 500.0
BURST_PERIOD_S = 1.0
BURST_DUTY = 0.5
BURST_RAMP_S = 0.010


@dataclass(frozen=True)
class SceneSpec:
    source_direction: SolidAngle
    target_drr_db: float
    duration_s: float
    sample_rate: float = 16000.0
    source_kind: str = "white"
    source_path: str | None = None
    diffuse_direction_count: int = DEFAULT_DIFFUSE_DIRECTIONS
    noise_snr_db: float | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ConfigError(f"duration must be > 0, got {self.duration_s}")
        if not self.sample_rate > 0:
            raise ConfigError(f"sample_rate must be > 0, got {self.sample_rate}")
        if self.diffuse_direction_count < MIN_DIFFUSE_DIRECTIONS:
            raise ConfigError(
                f"diffuse_direction_count must be >= {MIN_DIFFUSE_DIRECTIONS}"
            )
        if self.source_kind not in SOURCE_KINDS:
            raise ConfigError(f"source_kind must be one of {SOURCE_KINDS}")
        if self.source_kind == "wav" and not self.source_path:
            raise ConfigError("source_kind 'wav' needs source_path")
        if math.isnan(self.target_drr_db):
            raise ConfigError("target_drr_db must not be NaN")


@dataclass(frozen=True)
class SceneTruth:
    """What was actually generated, measured at the reference point."""

    measured_drr_db: float
    target_drr_db: float
    source_direction: SolidAngle
    rng_seed: int
    sample_rate: float
    duration_s: float
    source_kind: str
    diffuse_direction_count: int
    noise_snr_db: float | None
    frame_size: int
    hop: int
    activity: np.ndarray  # bool per STFT frame at (frame_size, hop)


def fibonacci_directions(count: int) -> np.ndarray:
    """Deterministic low-discrepancy point set on the unit sphere."""
    if count < 1:
        raise ConfigError("need at least one direction")
    i = np.arange(count)
    z = 1.0 - (2.0 * i + 1.0) / count
    golden = math.pi * (3.0 - math.sqrt(5.0))
    r = np.sqrt(np.maximum(0.0, 1.0 - z**2))
    return np.stack([r * np.cos(golden * i), r * np.sin(golden * i), z], axis=1)


def _tilt_filter(x: np.ndarray, sample_rate: float) -> np.ndarray:
    """First-order lowpass magnitude shaping (-6 dB/octave above the corner)."""
    spectrum = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(x.shape[0], d=1.0 / sample_rate)
    spectrum /= np.sqrt(1.0 + (freqs / TILT_CORNER_HZ) ** 2)
    return np.fft.irfft(spectrum, n=x.shape[0])


def _burst_envelope(n: int, sample_rate: float) -> np.ndarray:
    """Periodic on/off gate with raised-cosine ramps."""
    period = max(1, round(BURST_PERIOD_S * sample_rate))
    on = max(1, round(BURST_DUTY * period))
    ramp = min(max(1, round(BURST_RAMP_S * sample_rate)), on // 2)
    gate = np.zeros(period)
    gate[:on] = 1.0
    t = np.arange(ramp)
    fade = 0.5 * (1.0 - np.cos(math.pi * (t + 0.5) / ramp))
    gate[:ramp] = fade
    gate[on - ramp:on] = fade[::-1]
    reps = -(-n // period)
    return np.tile(gate, reps)[:n]


def _fine_structure(spec: SceneSpec, rng: np.random.Generator, n: int, source=None):
    """One draw of the source's fine structure (unit-scale, envelope excluded)."""
    if spec.source_kind == "white":
        return rng.standard_normal(n)
    if spec.source_kind == "bursts":
        return _tilt_filter(rng.standard_normal(n), spec.sample_rate)
    # wav: keep the magnitude spectrum, randomize the phase
    spectrum = np.abs(np.fft.rfft(source)).astype(complex)
    phases = rng.uniform(0.0, 2.0 * math.pi, spectrum.shape[0])
    spectrum *= np.exp(1j * phases)
    return np.fft.irfft(spectrum, n=n)


def _source_components(spec: SceneSpec, rng: np.random.Generator, n: int):
    """Returns (envelope, source signal); the source is envelope * fine."""
    if spec.source_kind == "wav":
        from .audio_io import read_wav

        samples, rate = read_wav(spec.source_path)
        if rate != spec.sample_rate:
            raise ConfigError(
                f"source wav rate {rate} != scene rate {spec.sample_rate}"
            )
        if samples.shape[1] != 1:
            raise ConfigError("source wav must be mono")
        mono = samples[:, 0]
        if mono.shape[0] < n:
            raise ConfigError("source wav shorter than the scene duration")
        src = mono[:n].copy()
        return np.ones(n), src
    envelope = (
        np.ones(n) if spec.source_kind == "white" else _burst_envelope(n, spec.sample_rate)
    )
    return envelope, envelope * _fine_structure(spec, rng, n)


def _delay_to_channels(
    spectrum: np.ndarray, freqs: np.ndarray, delays: np.ndarray
) -> np.ndarray:
    """Exact fractional delays via frequency-domain phase shifts; (n, M)."""
    n = 2 * (spectrum.shape[0] - 1)
    out = np.empty((n, delays.shape[0]))
    for m, tau in enumerate(delays):
        out[:, m] = np.fft.irfft(spectrum * np.exp(-2j * math.pi * freqs * tau), n=n)
    return out


def synthesize_scene(
    spec: SceneSpec,
    geom: ArrayGeometry,
    frame_size: int = DEFAULT_FRAME_SIZE,
    hop: int = DEFAULT_HOP,
):
    """Generate (samples, truth); samples are (n_samples, channels).

    target_drr_db of +inf produces a direct-only scene, -inf a
    diffuse-only one.  The reported measured ratio comes from the actual
    time-domain energies at the reference point, so it is what any
    estimator run on the samples should reproduce.
    """
    n = round(spec.duration_s * spec.sample_rate)
    if n < 1:
        raise ConfigError("scene too short for one sample")
    rng = np.random.default_rng(spec.rng_seed)
    envelope, source = _source_components(spec, rng, n)
    freqs = np.fft.rfftfreq(n, d=1.0 / spec.sample_rate)

    want_direct = spec.target_drr_db != -math.inf
    want_diffuse = spec.target_drr_db != math.inf

    direct = np.zeros((n, geom.n_channels))
    if want_direct:
        direct = _delay_to_channels(
            np.fft.rfft(source), freqs, propagation_delays(geom, spec.source_direction)
        )

    diffuse = np.zeros((n, geom.n_channels))
    diffuse_ref = np.zeros(n)
    if want_diffuse:
        directions = fibonacci_directions(spec.diffuse_direction_count)
        delays = delay_matrix(geom, directions)  # (directions, channels)
        acc = np.zeros((geom.n_channels, freqs.shape[0]), dtype=complex)
        ref_acc = np.zeros(freqs.shape[0], dtype=complex)
        for i in range(spec.diffuse_direction_count):
            wave = np.fft.rfft(envelope * _fine_structure(spec, rng, n, source))
            ref_acc += wave
            acc += wave[None, :] * np.exp(
                -2j * math.pi * freqs[None, :] * delays[i][:, None]
            )
        for m in range(geom.n_channels):
            diffuse[:, m] = np.fft.irfft(acc[m], n=n)
        diffuse_ref = np.fft.irfft(ref_acc, n=n)

    e_direct = float(np.sum(source**2)) if want_direct else 0.0
    e_diffuse = float(np.sum(diffuse_ref**2)) if want_diffuse else 0.0

    if not want_diffuse:
        scale, measured = 0.0, math.inf
    elif not want_direct:
        scale = 1.0 / math.sqrt(e_diffuse / n)  # unit mean power, arbitrary
        measured = -math.inf
    else:
        if e_direct == 0.0:
            raise ConfigError("source signal is empty")
        ratio = 10.0 ** (spec.target_drr_db / 10.0)
        scale = math.sqrt(e_direct / (ratio * e_diffuse))
        measured = 10.0 * math.log10(e_direct / (scale**2 * e_diffuse))

    mix = direct + scale * diffuse
    if spec.noise_snr_db is not None:
        reference = source * float(want_direct) + scale * diffuse_ref
        power = float(np.mean(reference**2))
        sigma = math.sqrt(power / 10.0 ** (spec.noise_snr_db / 10.0))
        mix = mix + sigma * rng.standard_normal((n, geom.n_channels))

    peak = float(np.max(np.abs(mix)))
    if peak > 0:
        mix *= 0.5 / peak

    n_frames = max(0, (n - frame_size) // hop + 1)
    on = np.concatenate([[0.0], np.cumsum(envelope > 0)])
    starts = np.arange(n_frames) * hop
    activity = (on[starts + frame_size] - on[starts]) / frame_size >= 0.5

    truth = SceneTruth(
        measured_drr_db=measured,
        target_drr_db=spec.target_drr_db,
        source_direction=spec.source_direction,
        rng_seed=spec.rng_seed,
        sample_rate=spec.sample_rate,
        duration_s=spec.duration_s,
        source_kind=spec.source_kind,
        diffuse_direction_count=spec.diffuse_direction_count,
        noise_snr_db=spec.noise_snr_db,
        frame_size=frame_size,
        hop=hop,
        activity=activity,
    )
    return mix, truth


def _encode_float(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _decode_float(x) -> float:
    return float(x)


def write_sidecar(path, truth: SceneTruth) -> None:
    """Ground-truth sidecar as JSON next to the rendered WAV."""
    payload = {
        "measured_drr_db": _encode_float(truth.measured_drr_db),
        "target_drr_db": _encode_float(truth.target_drr_db),
        "azimuth_rad": truth.source_direction.azimuth,
        "zenith_rad": truth.source_direction.zenith,
        "rng_seed": truth.rng_seed,
        "sample_rate": truth.sample_rate,
        "duration_s": truth.duration_s,
        "source_kind": truth.source_kind,
        "diffuse_direction_count": truth.diffuse_direction_count,
        "noise_snr_db": truth.noise_snr_db,
        "frame_size": truth.frame_size,
        "hop": truth.hop,
        "activity": [int(a) for a in truth.activity],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_sidecar(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    for key in ("measured_drr_db", "target_drr_db"):
        payload[key] = _decode_float(payload[key])
    return payload


def load_scene_spec(path) -> SceneSpec:
    """Scene description from TOML; see the README for the key list."""
    import tomli

    from .geometry import parse_angle

    try:
        with open(path, "rb") as fh:
            cfg = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse scene file {path}: {exc}") from exc

    def angle(key, default=None):
        if key not in cfg:
            if default is None:
                raise ConfigError(f"scene file {path} is missing '{key}'")
            return default
        return parse_angle(cfg[key])

    target = cfg.get("target_drr_db", 0.0)
    if isinstance(target, str):
        target = {"inf": math.inf, "-inf": -math.inf}.get(target.strip().lower())
        if target is None:
            raise ConfigError("target_drr_db string must be 'inf' or '-inf'")
    source = str(cfg.get("source", "white"))
    if source.lower().endswith(".wav"):
        kind, src_path = "wav", source
    else:
        kind, src_path = source, None
    return SceneSpec(
        source_direction=SolidAngle(angle("azimuth"), angle("zenith", math.pi / 2)),
        target_drr_db=float(target),
        duration_s=float(cfg.get("duration_s", 10.0)),
        sample_rate=float(cfg.get("sample_rate", 16000.0)),
        source_kind=kind,
        source_path=src_path,
        diffuse_direction_count=int(
            cfg.get("diffuse_directions", DEFAULT_DIFFUSE_DIRECTIONS)
        ),
        noise_snr_db=(
            float(cfg["noise_snr_db"]) if cfg.get("noise_snr_db") is not None else None
        ),
        rng_seed=int(cfg.get("seed", 0)),
    )
