"""Blind direct-to-reverberant ratio estimation from microphone arrays.

The estimator applies two delay-and-sum beamformers to a multichannel
recording, models each output PSD as a known mixture of the direct
sound's PSD and an isotropic reverberant field's angular PSD density,
solves the resulting 2x2 system per frequency bin, and reduces the
solved PSDs to a single dB ratio.  A synthetic-scene generator with
exact energy bookkeeping provides ground truth for verification.
"""

__version__ = "0.1.0"

from .beamforming import (
    BeamformerWeights,
    SphericalQuadrature,
    apply_beamformer,
    beam_gain,
    beam_gain_spectrum,
    das_weights,
    integrated_gain,
    integrated_gain_spectrum,
    output_psd,
)
from .doa import DoaEstimate, DoaGrid, estimate_doa
from .drr import (
    Calibration,
    DrrEstimate,
    apply_calibration,
    compute_drr,
    fit_calibration,
    load_calibration,
    save_calibration,
)
from .errors import (
    ConfigError,
    DegenerateBeamspaceError,
    DrrUndefinedError,
    EstimatorError,
    InputDataError,
    SampleRateError,
    VadError,
)
from .geometry import (
    ArrayGeometry,
    SolidAngle,
    default_geometry,
    load_geometry,
    propagation_delays,
    steering_vector,
)
from .pipeline import EstimateReport, PipelineConfig, estimate_from_samples
from .psd_estimation import (
    BinFlag,
    GainMatrix,
    PsdPair,
    build_gain_matrix,
    identical_beampattern_psd,
    solve_psd,
)
from .stft import MultichannelSpectrogram, analyze
from .synth import SceneSpec, SceneTruth, fibonacci_directions, synthesize_scene
from .vad import VadMask, compute_mask, estimate_noise_floor

__all__ = [
    "ArrayGeometry",
    "BeamformerWeights",
    "BinFlag",
    "Calibration",
    "ConfigError",
    "DegenerateBeamspaceError",
    "DoaEstimate",
    "DoaGrid",
    "DrrEstimate",
    "DrrUndefinedError",
    "EstimateReport",
    "EstimatorError",
    "GainMatrix",
    "InputDataError",
    "MultichannelSpectrogram",
    "PipelineConfig",
    "PsdPair",
    "SampleRateError",
    "SceneSpec",
    "SceneTruth",
    "SolidAngle",
    "SphericalQuadrature",
    "VadError",
    "VadMask",
    "analyze",
    "apply_beamformer",
    "apply_calibration",
    "beam_gain",
    "beam_gain_spectrum",
    "build_gain_matrix",
    "compute_drr",
    "compute_mask",
    "das_weights",
    "default_geometry",
    "estimate_doa",
    "estimate_from_samples",
    "estimate_noise_floor",
    "fibonacci_directions",
    "fit_calibration",
    "identical_beampattern_psd",
    "integrated_gain",
    "integrated_gain_spectrum",
    "load_calibration",
    "load_geometry",
    "output_psd",
    "propagation_delays",
    "save_calibration",
    "solve_psd",
    "steering_vector",
    "synthesize_scene",
]
