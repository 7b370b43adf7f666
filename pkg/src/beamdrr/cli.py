"""Command-line entry points.

Subcommands:
  estimate   one WAV file -> structured text report (plus optional CSV)
  synth      scene config -> multichannel WAV + ground-truth sidecar
  eval       manifest CSV -> per-item CSV + summary statistics
  calibrate  manifest CSV -> constant-bias calibration file

Exit codes: 0 success, 2 bad configuration or flags, 3 unusable audio
input (format, channel count, missing file), 4 VAD failure, 5 degenerate
beamspace, 6 undefined ratio, 7 sample-rate mismatch.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .audio_io import read_wav, write_wav
from .drr import fit_calibration, load_calibration, save_calibration
from .errors import (
    ConfigError,
    DegenerateBeamspaceError,
    DrrUndefinedError,
    EstimatorError,
    InputDataError,
    SampleRateError,
    VadError,
)
from .geometry import default_geometry, load_geometry, parse_angle
from .pipeline import EstimateReport, PipelineConfig, estimate_from_samples, write_diagnostics_csv
from .synth import load_scene_spec, synthesize_scene, write_sidecar

EXIT_CODES = {
    ConfigError: 2,
    InputDataError: 3,
    VadError: 4,
    DegenerateBeamspaceError: 5,
    DrrUndefinedError: 6,
    SampleRateError: 7,
}


def _exit_code(exc: EstimatorError) -> int:
    code = EXIT_CODES.get(type(exc))
    if code is not None:
        return code
    for cls, fallback in EXIT_CODES.items():
        if isinstance(exc, cls):
            return fallback
    return 1

_DEFAULTS = PipelineConfig()


def _angle(text: str) -> float:
    try:
        return parse_angle(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--geometry", metavar="TOML",
                   help="array geometry file (default: bundled 3-mic triangle)")
    p.add_argument("--sample-rate", type=float, default=_DEFAULTS.sample_rate,
                   help="expected WAV sample rate in Hz; mismatching files are rejected")
    p.add_argument("--frame-size", type=int, default=_DEFAULTS.frame_size)
    p.add_argument("--hop", type=int, default=_DEFAULTS.hop)
    p.add_argument("--window", default=_DEFAULTS.window_id, choices=("hann", "rect"))
    p.add_argument("--method", default=_DEFAULTS.method,
                   choices=("beamspace", "identical-beampattern"))
    p.add_argument("--offset-az", type=_angle, default=_DEFAULTS.look_offset_azimuth,
                   help="azimuth offset of the second beam (radians, or e.g. '60deg')")
    p.add_argument("--cond-threshold", type=float, default=_DEFAULTS.cond_threshold)
    p.add_argument("--band-low-hz", type=float, default=_DEFAULTS.band_hz[0])
    p.add_argument("--band-high-hz", type=float, default=_DEFAULTS.band_hz[1])
    p.add_argument("--srp-band-low-hz", type=float, default=_DEFAULTS.srp_band_hz[0])
    p.add_argument("--srp-band-high-hz", type=float, default=_DEFAULTS.srp_band_hz[1])
    p.add_argument("--grid-az-step", type=_angle, default=_DEFAULTS.grid_azimuth_step)
    p.add_argument("--grid-zen-step", type=_angle, default=_DEFAULTS.grid_zenith_step)
    p.add_argument("--quad-zenith-nodes", type=int, default=_DEFAULTS.quad_zenith_nodes)
    p.add_argument("--quad-azimuth-nodes", type=int, default=_DEFAULTS.quad_azimuth_nodes)
    p.add_argument("--vad-margin-db", type=float, default=_DEFAULTS.vad_margin_db)
    p.add_argument("--vad-percentile", type=float, default=_DEFAULTS.vad_percentile)
    p.add_argument("--vad-min-frames", type=int, default=_DEFAULTS.vad_min_frames)
    p.add_argument("--vad-off", action="store_true",
                   help="treat every frame as active")
    p.add_argument("--doa-az", type=_angle, default=None,
                   help="known source azimuth; skips estimation (needs --doa-zen)")
    p.add_argument("--doa-zen", type=_angle, default=None)
    p.add_argument("--calibration", metavar="TOML",
                   help="calibration file to apply to raw estimates")


def _config_from_args(args) -> PipelineConfig:
    return PipelineConfig(
        sample_rate=args.sample_rate,
        frame_size=args.frame_size,
        hop=args.hop,
        window_id=args.window,
        method=args.method,
        look_offset_azimuth=args.offset_az,
        cond_threshold=args.cond_threshold,
        band_hz=(args.band_low_hz, args.band_high_hz),
        srp_band_hz=(args.srp_band_low_hz, args.srp_band_high_hz),
        grid_azimuth_step=args.grid_az_step,
        grid_zenith_step=args.grid_zen_step,
        quad_zenith_nodes=args.quad_zenith_nodes,
        quad_azimuth_nodes=args.quad_azimuth_nodes,
        vad_margin_db=args.vad_margin_db,
        vad_percentile=args.vad_percentile,
        vad_min_frames=args.vad_min_frames,
        vad_off=args.vad_off,
        doa_azimuth=args.doa_az,
        doa_zenith=args.doa_zen,
    )


def _geometry_from_args(args, override: str | None = None):
    path = override or args.geometry
    return load_geometry(path) if path else default_geometry()


def _run_estimate(
    wav_path, args, config: PipelineConfig, geometry=None, calibration=None
) -> EstimateReport:
    samples, rate = read_wav(wav_path)
    if rate != config.sample_rate:
        raise SampleRateError(
            f"sample rate mismatch: {wav_path} has {rate} Hz, expected "
            f"{config.sample_rate} Hz (no resampling is performed)"
        )
    geom = geometry if geometry is not None else _geometry_from_args(args)
    return estimate_from_samples(
        samples, rate, geom, config, calibration=calibration, input_path=str(wav_path)
    )


def _cmd_estimate(args) -> int:
    config = _config_from_args(args)
    calibration = load_calibration(args.calibration) if args.calibration else None
    report = _run_estimate(args.wav, args, config, calibration=calibration)
    report = dataclasses.replace(
        report,
        timestamp=datetime.now(timezone.utc).isoformat(),
        diagnostics_csv_path=args.diagnostics_csv,
    )
    if args.diagnostics_csv:
        write_diagnostics_csv(report, args.diagnostics_csv)
    text = report.to_text()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_synth(args) -> int:
    spec = load_scene_spec(args.scene)
    if args.seed is not None:
        spec = dataclasses.replace(spec, rng_seed=args.seed)
    geom = _geometry_from_args(args)
    samples, truth = synthesize_scene(spec, geom)
    write_wav(args.out, samples, spec.sample_rate)
    sidecar = args.sidecar or str(args.out) + ".json"
    write_sidecar(sidecar, truth)
    print(f"wrote {args.out} ({samples.shape[0]} samples x {samples.shape[1]} ch), "
          f"measured drr {truth.measured_drr_db:+.3f} dB, sidecar {sidecar}")
    return 0


_MANIFEST_COLUMNS = ("wav", "ground_truth_db", "split", "condition",
                     "doa_az", "doa_zen", "geometry")


def _read_manifest(path) -> list[dict]:
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError:
        raise ConfigError(f"manifest not found: {path}")
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "wav" not in reader.fieldnames:
            raise ConfigError(f"manifest {path} must have a header with a 'wav' column")
        rows = [dict(r) for r in reader]
    if not rows:
        raise ConfigError(f"manifest {path} has no rows")
    base = Path(path).parent
    for i, row in enumerate(rows):
        wav = (row.get("wav") or "").strip()
        if not wav:
            raise ConfigError(f"manifest row {i + 1} has an empty 'wav' field")
        row["wav"] = str((base / wav)) if not Path(wav).is_absolute() else wav
        for key in _MANIFEST_COLUMNS:
            row.setdefault(key, "")
    return rows


def _row_config(row: dict, base: PipelineConfig) -> PipelineConfig:
    az, zen = (row.get("doa_az") or "").strip(), (row.get("doa_zen") or "").strip()
    if az and zen:
        return dataclasses.replace(
            base, doa_azimuth=parse_angle(az), doa_zenith=parse_angle(zen)
        )
    return base


def _evaluate_rows(rows: list[dict], args, config: PipelineConfig) -> list[dict]:
    results = []
    for row in rows:
        res = dict(row)
        res["raw_db"] = res["error_db"] = None
        truth = (row.get("ground_truth_db") or "").strip()
        res["truth_db"] = float(truth) if truth else None
        try:
            geom = _geometry_from_args(args, override=(row.get("geometry") or "").strip() or None)
            report = _run_estimate(row["wav"], args, _row_config(row, config), geometry=geom)
        except FileNotFoundError:
            res["status"] = "missing"
            results.append(res)
            continue
        except EstimatorError as exc:
            res["status"] = f"failed: {type(exc).__name__}"
            results.append(res)
            continue
        res["status"] = "ok"
        res["raw_db"] = report.estimate.raw_db
        if res["truth_db"] is not None:
            res["error_db"] = res["raw_db"] - res["truth_db"]
        results.append(res)
    return results


def _stats(errors: list[float]) -> dict:
    arr = np.asarray(errors, dtype=float)
    return {
        "n": arr.size,
        "mean_error_db": float(arr.mean()),
        "std_error_db": float(arr.std()),
        "mean_abs_error_db": float(np.abs(arr).mean()),
    }


def _print_group(label: str, errors: list[float], out) -> None:
    if not errors:
        return
    s = _stats(errors)
    out.write(
        f"group {label}: n={s['n']} mean_error_db={s['mean_error_db']:.4f} "
        f"std_error_db={s['std_error_db']:.4f} mean_abs_error_db={s['mean_abs_error_db']:.4f}\n"
    )


def _cmd_eval(args) -> int:
    config = _config_from_args(args)
    rows = _read_manifest(args.manifest)
    results = _evaluate_rows(rows, args, config)

    bias = None
    if args.calibrate_on_dev:
        pairs = [
            (r["raw_db"], r["truth_db"])
            for r in results
            if r["status"] == "ok" and r["truth_db"] is not None
            and (r.get("split") or "").strip() == "dev"
        ]
        if not pairs:
            raise ConfigError("--calibrate-on-dev: no usable rows with split=dev")
        cal = fit_calibration(pairs, provenance=f"{args.manifest} dev split")
        bias = cal.bias_db
    elif args.calibration:
        bias = load_calibration(args.calibration).bias_db

    for r in results:
        r["calibrated_db"] = None if r["raw_db"] is None or bias is None else r["raw_db"] - bias
        r["calibrated_error_db"] = (
            None
            if r["calibrated_db"] is None or r["truth_db"] is None
            else r["calibrated_db"] - r["truth_db"]
        )

    if args.out_csv:
        with open(args.out_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["wav", "split", "condition", "ground_truth_db", "raw_db",
                             "calibrated_db", "error_db", "calibrated_error_db", "status"])
            for r in results:
                writer.writerow([
                    r["wav"], r.get("split", ""), r.get("condition", ""),
                    _cell(r["truth_db"]), _cell(r["raw_db"]), _cell(r["calibrated_db"]),
                    _cell(r["error_db"]), _cell(r["calibrated_error_db"]), r["status"],
                ])

    out = sys.stdout
    n_ok = sum(r["status"] == "ok" for r in results)
    n_missing = sum(r["status"] == "missing" for r in results)
    n_failed = len(results) - n_ok - n_missing
    out.write(f"rows: {len(results)} total, {n_ok} ok, {n_missing} missing, {n_failed} failed\n")
    for r in results:
        if r["status"] == "missing":
            out.write(f"missing: {r['wav']}\n")
        elif r["status"] != "ok":
            out.write(f"{r['status']}: {r['wav']}\n")
    if bias is not None:
        out.write(f"calibration_bias_db: {bias:.6f}\n")

    def errors_of(rows_subset, key):
        return [r[key] for r in rows_subset if r["status"] == "ok" and r[key] is not None]

    error_key = "calibrated_error_db" if bias is not None else "error_db"
    _print_group("overall", errors_of(results, error_key), out)
    for split in sorted({(r.get("split") or "").strip() for r in results} - {""}):
        subset = [r for r in results if (r.get("split") or "").strip() == split]
        _print_group(f"split={split}", errors_of(subset, error_key), out)
    for cond in sorted({(r.get("condition") or "").strip() for r in results} - {""}):
        subset = [r for r in results if (r.get("condition") or "").strip() == cond]
        _print_group(f"condition={cond}", errors_of(subset, error_key), out)
    return 0


def _cell(x):
    return "" if x is None else repr(float(x))


def _cmd_calibrate(args) -> int:
    config = _config_from_args(args)
    rows = _read_manifest(args.manifest)
    if args.split != "*":
        selected = [r for r in rows if (r.get("split") or "").strip() == args.split]
        if not selected and any((r.get("split") or "").strip() for r in rows):
            raise ConfigError(f"no manifest rows with split={args.split}")
        rows = selected or rows
    results = _evaluate_rows(rows, args, config)
    pairs = [
        (r["raw_db"], r["truth_db"])
        for r in results
        if r["status"] == "ok" and r["truth_db"] is not None
    ]
    if not pairs:
        raise ConfigError("no usable (estimate, ground truth) pairs in manifest")
    cal = fit_calibration(pairs, provenance=f"{args.manifest}: {len(pairs)} pairs")
    save_calibration(cal, args.out)
    print(f"bias_db: {cal.bias_db:.6f} (from {len(pairs)} pairs) -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamdrr",
        description="Blind direct-to-reverberant ratio estimation from "
                    "microphone-array recordings.",
    )
    parser.add_argument("--version", action="version", version=f"beamdrr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="estimate the ratio for one WAV file")
    p_est.add_argument("wav")
    _add_pipeline_flags(p_est)
    p_est.add_argument("--out", help="write the report here instead of stdout")
    p_est.add_argument("--diagnostics-csv", help="write per-bin PSDs and flags here")
    p_est.set_defaults(handler=_cmd_estimate)

    p_syn = sub.add_parser("synth", help="render a synthetic scene with known ratio")
    p_syn.add_argument("scene", help="scene description TOML")
    p_syn.add_argument("--geometry", metavar="TOML")
    p_syn.add_argument("--out", required=True, help="output WAV path")
    p_syn.add_argument("--sidecar", help="ground-truth JSON path (default: <out>.json)")
    p_syn.add_argument("--seed", type=int, default=None, help="override the scene seed")
    p_syn.set_defaults(handler=_cmd_synth)

    p_eval = sub.add_parser("eval", help="batch-evaluate a manifest of recordings")
    p_eval.add_argument("manifest", help="CSV with columns: wav, ground_truth_db, "
                                         "split, condition, doa_az, doa_zen, geometry")
    _add_pipeline_flags(p_eval)
    p_eval.add_argument("--out-csv", help="write per-item results here")
    p_eval.add_argument("--calibrate-on-dev", action="store_true",
                        help="fit the bias on split=dev rows and apply it everywhere")
    p_eval.set_defaults(handler=_cmd_eval)

    p_cal = sub.add_parser("calibrate", help="fit a constant-bias calibration file")
    p_cal.add_argument("manifest")
    _add_pipeline_flags(p_cal)
    p_cal.add_argument("--out", required=True, help="calibration TOML to write")
    p_cal.add_argument("--split", default="dev",
                       help="manifest split to fit on ('*' for all rows; default dev)")
    p_cal.set_defaults(handler=_cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CODES[InputDataError]
    except EstimatorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
