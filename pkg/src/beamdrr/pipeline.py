"""End-to-end estimation: STFT, VAD, DOA, two beamformers, PSD solve, DRR.

This is the glue the CLI calls; every stage lives in its own module and
is unit-tested there.  The report echoes every configuration value that
influenced the result so a run can be reproduced exactly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import beamforming, doa, drr, psd_estimation, stft, vad
from .errors import DegenerateBeamspaceError, ConfigError, InputDataError
from .geometry import ArrayGeometry, SolidAngle


@dataclass(frozen=True)
class PipelineConfig:
    """All knobs of the estimation pipeline, with their defaults."""

    sample_rate: float = stft.DEFAULT_SAMPLE_RATE
    frame_size: int = stft.DEFAULT_FRAME_SIZE
    hop: int = stft.DEFAULT_HOP
    window_id: str = "hann"
    method: str = "beamspace"  # beamspace | identical-beampattern
    look_offset_azimuth: float = psd_estimation.DEFAULT_LOOK_OFFSET
    cond_threshold: float = psd_estimation.DEFAULT_COND_THRESHOLD
    band_hz: tuple = drr.DEFAULT_BAND_HZ
    srp_band_hz: tuple = doa.DEFAULT_SRP_BAND_HZ
    grid_azimuth_step: float = doa.DEFAULT_AZIMUTH_STEP
    grid_zenith_step: float = doa.DEFAULT_ZENITH_STEP
    quad_zenith_nodes: int = beamforming.DEFAULT_ZENITH_NODES
    quad_azimuth_nodes: int = beamforming.DEFAULT_AZIMUTH_NODES
    vad_channel: int = 0
    vad_percentile: float = vad.DEFAULT_PERCENTILE
    vad_margin_db: float = vad.DEFAULT_MARGIN_DB
    vad_min_frames: int = vad.DEFAULT_MIN_FRAMES
    vad_off: bool = False
    doa_azimuth: float | None = None  # both set: skip estimation
    doa_zenith: float | None = None

    def __post_init__(self):
        if self.method not in ("beamspace", "identical-beampattern"):
            raise ConfigError(f"unknown method {self.method!r}")
        if (self.doa_azimuth is None) != (self.doa_zenith is None):
            raise ConfigError("supply both doa azimuth and zenith, or neither")


@dataclass(frozen=True)
class BinDiagnostics:
    """Per-bin intermediate values, for the optional CSV dump."""

    freqs_hz: np.ndarray
    output_psd_1: np.ndarray
    output_psd_2: np.ndarray
    direct: np.ndarray
    reverb: np.ndarray
    cond: np.ndarray
    flags: np.ndarray


@dataclass(frozen=True)
class EstimateReport:
    sample_rate: float
    n_channels: int
    geometry_mics_m: list
    speed_of_sound: float
    frames_total: int
    vad_mode: str
    vad_active_frames: int
    doa_mode: str
    doa_azimuth_rad: float
    doa_zenith_rad: float
    doa_non_informative: bool
    method: str
    estimate: drr.DrrEstimate
    calibration_bias_db: float | None
    config: PipelineConfig
    diagnostics: BinDiagnostics
    input_path: str | None = None
    timestamp: str | None = None
    diagnostics_csv_path: str | None = None

    def to_text(self) -> str:
        """Stable key: value rendering; identical runs give identical text
        apart from the timestamp line."""
        est = self.estimate
        lines = [
            f"tool: beamdrr {_version()}",
            f"timestamp: {self.timestamp or 'n/a'}",
            f"input: {self.input_path or 'n/a'}",
            f"sample_rate_hz: {self.sample_rate!r}",
            f"channels: {self.n_channels}",
            f"geometry_mics_m: {self.geometry_mics_m!r}",
            f"speed_of_sound_mps: {self.speed_of_sound!r}",
            f"frames_total: {self.frames_total}",
            f"vad_mode: {self.vad_mode}",
            f"vad_active_frames: {self.vad_active_frames}",
            f"doa_mode: {self.doa_mode}",
            f"doa_azimuth_rad: {self.doa_azimuth_rad!r}",
            f"doa_zenith_rad: {self.doa_zenith_rad!r}",
            f"doa_non_informative: {self.doa_non_informative}",
            f"method: {self.method}",
            f"band_bins: {est.band_bins[0]}..{est.band_bins[1]}",
            f"bins_used: {est.bins_used}",
            f"bins_excluded: {est.bins_excluded}",
            f"drr_raw_db: {est.raw_db!r}",
            f"calibration_bias_db: {_opt(self.calibration_bias_db)}",
            f"drr_calibrated_db: {_opt(est.calibrated_db)}",
            f"diagnostics_csv: {self.diagnostics_csv_path or 'none'}",
        ]
        for item in sorted(asdict(self.config).items()):
            lines.append(f"config.{item[0]}: {item[1]!r}")
        return "\n".join(lines) + "\n"


def _opt(x) -> str:
    return "none" if x is None else repr(x)


def _version() -> str:
    from . import __version__

    return __version__


def estimate_from_samples(
    samples: np.ndarray,
    sample_rate: float,
    geom: ArrayGeometry,
    config: PipelineConfig | None = None,
    calibration: drr.Calibration | None = None,
    input_path: str | None = None,
) -> EstimateReport:
    """Run the full pipeline on in-memory samples of shape (n, channels)."""
    config = config or PipelineConfig()
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[1] < 2 or geom.n_channels < 2:
        raise DegenerateBeamspaceError(
            "beamspace degenerate: need at least 2 channels"
        )
    if samples.shape[1] != geom.n_channels:
        raise InputDataError(
            f"channel mismatch: signal has {samples.shape[1]}, geometry {geom.n_channels}"
        )

    spec = stft.analyze(
        samples,
        sample_rate=sample_rate,
        frame_size=config.frame_size,
        hop=config.hop,
        window_id=config.window_id,
    )

    if config.vad_off:
        mask = vad.VadMask.all_active(spec.n_frames)
        vad_mode = "off"
    else:
        floor = vad.estimate_noise_floor(
            spec, channel=config.vad_channel, percentile=config.vad_percentile
        )
        mask = vad.compute_mask(
            spec,
            channel=config.vad_channel,
            floor=floor,
            margin_db=config.vad_margin_db,
            min_frames=config.vad_min_frames,
        )
        vad_mode = "threshold"

    if config.doa_azimuth is not None:
        source_direction = SolidAngle(config.doa_azimuth, config.doa_zenith)
        doa_mode, non_informative = "supplied", False
    else:
        grid = doa.DoaGrid(
            azimuth_step=config.grid_azimuth_step,
            zenith_step=config.grid_zenith_step,
        )
        srp_band = spec.band_bins(*config.srp_band_hz)
        found = doa.estimate_doa(spec, geom, grid, mask, srp_band)
        source_direction = found.angle
        doa_mode, non_informative = "estimated", found.non_informative

    omegas = spec.bin_omegas
    w1 = beamforming.das_weights(geom, source_direction, omegas)
    w2 = beamforming.das_weights(
        geom, source_direction.offset_azimuth(config.look_offset_azimuth), omegas
    )
    p1 = beamforming.output_psd(beamforming.apply_beamformer(spec, w1), mask)
    p2 = beamforming.output_psd(beamforming.apply_beamformer(spec, w2), mask)

    if config.method == "beamspace":
        quad = beamforming.SphericalQuadrature.product_rule(
            config.quad_zenith_nodes, config.quad_azimuth_nodes
        )
        gm = psd_estimation.build_gain_matrix(w1, w2, source_direction, geom, quad)
        pair = psd_estimation.solve_psd(
            np.column_stack([p1, p2]), gm, cond_threshold=config.cond_threshold
        )
        cond = gm.cond
    else:
        g1 = beamforming.beam_gain_spectrum(w1, geom, source_direction)
        g2 = beamforming.beam_gain_spectrum(w2, geom, source_direction)
        mic_psd = beamforming.output_psd(spec.data[config.vad_channel], mask)
        pair = psd_estimation.identical_beampattern_psd(
            p1, p2, g1, g2, mic_psd, cond_threshold=config.cond_threshold
        )
        with np.errstate(divide="ignore"):
            cond = (np.abs(g1) + np.abs(g2)) / np.abs(g1 - g2)

    band = spec.band_bins(*config.band_hz)
    estimate = drr.compute_drr(pair, band, method=config.method)
    bias = None
    if calibration is not None:
        estimate = drr.apply_calibration(estimate, calibration)
        bias = calibration.bias_db

    return EstimateReport(
        sample_rate=float(sample_rate),
        n_channels=geom.n_channels,
        geometry_mics_m=[[float(v) for v in row] for row in geom.mic_positions],
        speed_of_sound=geom.speed_of_sound,
        frames_total=spec.n_frames,
        vad_mode=vad_mode,
        vad_active_frames=mask.n_active,
        doa_mode=doa_mode,
        doa_azimuth_rad=source_direction.azimuth,
        doa_zenith_rad=source_direction.zenith,
        doa_non_informative=non_informative,
        method=config.method,
        estimate=estimate,
        calibration_bias_db=bias,
        config=config,
        diagnostics=BinDiagnostics(
            freqs_hz=spec.bin_freqs_hz,
            output_psd_1=p1,
            output_psd_2=p2,
            direct=pair.direct,
            reverb=pair.reverb,
            cond=cond,
            flags=pair.flags.astype(int),
        ),
        input_path=input_path,
    )


def write_diagnostics_csv(report: EstimateReport, path) -> None:
    """Per-bin CSV: frequency, both output PSDs, solved PSDs, cond, flag."""
    import csv

    d = report.diagnostics
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["freq_hz", "output_psd_1", "output_psd_2", "direct_psd",
             "reverb_psd_density", "cond", "flag"]
        )
        for k in range(d.freqs_hz.shape[0]):
            writer.writerow(
                [d.freqs_hz[k], d.output_psd_1[k], d.output_psd_2[k],
                 d.direct[k], d.reverb[k], d.cond[k], int(d.flags[k])]
            )
