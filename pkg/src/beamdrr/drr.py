"""Reduce per-bin PSD estimates to one ratio in dB, with bias calibration.

The ratio compares the band-summed direct PSD to the band-summed
reverberant PSD, the latter integrated over the full sphere (a factor of
4*pi on the angular density).  A constant dB bias fitted on labelled
development data can be subtracted to compensate systematic offsets such
as differing conventions for where "direct" ends and "reverberant"
begins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .beamforming import FULL_SPHERE
from .errors import ConfigError, DrrUndefinedError
from .psd_estimation import PsdPair

DEFAULT_BAND_HZ = (300.0, 5500.0)


@dataclass(frozen=True)
class DrrEstimate:
    raw_db: float
    band_bins: tuple  # (first bin, last bin) summed over
    bins_used: int
    bins_excluded: int
    method: str
    calibrated_db: float | None = None

    @property
    def best_db(self) -> float:
        """Calibrated value when available, raw otherwise."""
        return self.raw_db if self.calibrated_db is None else self.calibrated_db


@dataclass(frozen=True)
class Calibration:
    bias_db: float
    provenance: str = ""

    def __post_init__(self):
        if not math.isfinite(self.bias_db):
            raise ConfigError(f"calibration bias must be finite, got {self.bias_db}")


def compute_drr(psd: PsdPair, band: np.ndarray, method: str = "beamspace") -> DrrEstimate:
    """10*log10 of summed direct over 4*pi times summed reverberant density.

    Sums run over the band's usable bins (ill-conditioned ones are
    skipped; clamped ones contribute their clamped values).
    """
    band = np.asarray(band, dtype=int)
    if band.size == 0:
        raise ConfigError("empty frequency band for the ratio")
    use = band[psd.usable[band]]
    if use.size == 0:
        raise DrrUndefinedError("no usable bins in band")
    sum_direct = float(psd.direct[use].sum())
    sum_reverb = float(psd.reverb[use].sum())
    if sum_reverb <= 0.0:
        raise DrrUndefinedError("no reverberant energy estimated")
    ratio = sum_direct / (FULL_SPHERE * sum_reverb)
    raw_db = 10.0 * math.log10(ratio) if ratio > 0 else -math.inf
    return DrrEstimate(
        raw_db=raw_db,
        band_bins=(int(band[0]), int(band[-1])),
        bins_used=int(use.size),
        bins_excluded=int(band.size - use.size),
        method=method,
    )


def fit_calibration(pairs, provenance: str = "") -> Calibration:
    """Constant bias: the mean of (estimated - ground truth) in dB."""
    pairs = list(pairs)
    if not pairs:
        raise ConfigError("no calibration pairs")
    errors = [float(est) - float(truth) for est, truth in pairs]
    return Calibration(bias_db=float(np.mean(errors)), provenance=provenance)


def apply_calibration(estimate: DrrEstimate, cal: Calibration) -> DrrEstimate:
    """Subtract the fitted bias; the raw value is preserved alongside."""
    return replace(estimate, calibrated_db=estimate.raw_db - cal.bias_db)


def save_calibration(cal: Calibration, path) -> None:
    """Write a calibration file (TOML keys: bias_db, provenance)."""
    provenance = cal.provenance.replace("\\", "\\\\").replace('"', '\\"')
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"bias_db = {cal.bias_db!r}\n")
        fh.write(f'provenance = "{provenance}"\n')


def load_calibration(path) -> Calibration:
    import tomli

    try:
        with open(path, "rb") as fh:
            cfg = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse calibration file {path}: {exc}") from exc
    if "bias_db" not in cfg:
        raise ConfigError(f"calibration file {path} is missing 'bias_db'")
    bias = cfg["bias_db"]
    if not isinstance(bias, (int, float)):
        raise ConfigError(f"calibration file {path}: bias_db must be a number")
    return Calibration(bias_db=float(bias), provenance=str(cfg.get("provenance", "")))
