import math

import numpy as np
import pytest

from beamdrr import (
    SceneSpec,
    SolidAngle,
    VadError,
    VadMask,
    analyze,
    compute_mask,
    estimate_noise_floor,
    synthesize_scene,
)
from beamdrr.geometry import default_geometry

# white noise through a periodic hann window: E|X_k|^2 = sigma^2 * sum(w^2)
HANN_512_POWER = 512 * 3.0 / 8.0


def white_noise_spec(sigma, seconds=4.0, seed=0):
    rng = np.random.default_rng(seed)
    x = sigma * rng.standard_normal(int(16000 * seconds))
    return analyze(x, 16000.0)


class TestNoiseFloor:
    def test_tracks_true_noise_psd(self):
        sigma = 0.1
        floor = estimate_noise_floor(white_noise_spec(sigma))
        err_db = 10 * np.log10(floor / (sigma**2 * HANN_512_POWER))
        assert np.mean(np.abs(err_db)) < 3.0
        assert abs(np.mean(err_db)) < 1.0

    def test_silence_gives_zero_floor(self):
        spec = analyze(np.zeros(16000), 16000.0)
        assert np.all(estimate_noise_floor(spec) == 0.0)

    def test_sparse_bursts_do_not_lift_the_floor(self):
        rng = np.random.default_rng(1)
        noise = 0.05 * rng.standard_normal(64000)
        with_bursts = noise.copy()
        # loud events in under 20% of the signal
        for start in (5000, 25000, 45000):
            with_bursts[start : start + 3000] += rng.standard_normal(3000)
        floor_noise = estimate_noise_floor(analyze(noise, 16000.0))
        floor_burst = estimate_noise_floor(analyze(with_bursts, 16000.0))
        ratio_db = 10 * np.log10(floor_burst[1:-1] / floor_noise[1:-1])
        assert np.mean(np.abs(ratio_db)) < 3.0

    def test_too_few_frames_rejected(self):
        spec = analyze(np.zeros(1024), 16000.0)  # 3 frames
        with pytest.raises(VadError):
            estimate_noise_floor(spec)


class TestComputeMask:
    def test_single_loud_frame_selected(self):
        x = np.zeros(16000)
        x[8000:8512] = 1.0
        spec = analyze(x, 16000.0)
        mask = compute_mask(spec, min_frames=1)
        loud = np.nonzero(mask.active)[0]
        assert mask.n_active >= 1
        # every selected frame overlaps the burst
        assert np.all((loud * 256 + 512 > 8000) & (loud * 256 < 8512))

    def test_uniform_frames_yield_no_activity(self):
        # identical frames everywhere: nothing exceeds floor + 10 dB
        block = np.random.default_rng(2).standard_normal(256)
        x = np.tile(block, 40)
        spec = analyze(x, 16000.0)
        with pytest.raises(VadError, match="too few frames"):
            compute_mask(spec)

    def test_burst_scene_precision_and_recall(self):
        geom = default_geometry()
        scene = SceneSpec(
            source_direction=SolidAngle(1.0, math.pi / 2),
            target_drr_db=math.inf,
            duration_s=8.0,
            source_kind="bursts",
            noise_snr_db=10.0,
            rng_seed=11,
        )
        samples, truth = synthesize_scene(scene, geom)
        spec = analyze(samples, 16000.0)
        mask = compute_mask(spec, margin_db=7.0, min_frames=1)
        labels = truth.activity
        tp = np.sum(mask.active & labels)
        fp = np.sum(mask.active & ~labels)
        fn = np.sum(~mask.active & labels)
        assert tp / (tp + fn) >= 0.9  # recall
        assert tp / (tp + fp) >= 0.8  # precision

    @pytest.mark.parametrize("scale", [1e-3, 0.1, math.pi, 10.0, 1e3])
    def test_scale_invariance(self, scale):
        geom = default_geometry()
        scene = SceneSpec(
            source_direction=SolidAngle(1.0, math.pi / 2),
            target_drr_db=math.inf,
            duration_s=4.0,
            source_kind="bursts",
            noise_snr_db=10.0,
            rng_seed=12,
        )
        samples, _ = synthesize_scene(scene, geom)
        base = compute_mask(analyze(samples, 16000.0), min_frames=1)
        scaled = compute_mask(analyze(scale * samples, 16000.0), min_frames=1)
        np.testing.assert_array_equal(base.active, scaled.active)

    def test_lower_margin_never_deactivates(self):
        geom = default_geometry()
        scene = SceneSpec(
            source_direction=SolidAngle(1.0, math.pi / 2),
            target_drr_db=math.inf,
            duration_s=4.0,
            source_kind="bursts",
            noise_snr_db=15.0,
            rng_seed=13,
        )
        samples, _ = synthesize_scene(scene, geom)
        spec = analyze(samples, 16000.0)
        strict = compute_mask(spec, margin_db=12.0, min_frames=1)
        loose = compute_mask(spec, margin_db=8.0, min_frames=1)
        assert np.all(loose.active[strict.active])

    def test_min_frames_enforced(self):
        x = np.zeros(16000)
        x[8000:8512] = 1.0
        spec = analyze(x, 16000.0)
        with pytest.raises(VadError, match="too few frames"):
            compute_mask(spec, min_frames=10)


class TestVadMask:
    def test_all_active(self):
        mask = VadMask.all_active(7)
        assert len(mask) == 7 and mask.n_active == 7

    def test_counts(self):
        mask = VadMask(np.array([True, False, True]))
        assert mask.n_active == 2
