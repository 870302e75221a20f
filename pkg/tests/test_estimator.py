import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hoversil.dynamics import RigidBodyState
from hoversil.estimator import (
    AltitudeSource,
    CameraConfig,
    CameraFrame,
    EstimatedUavState,
    EstimatorConfig,
    LandingPadEstimate,
    Marker,
    MarkerDetection,
    NoiseConfig,
    PadLayout,
    SensorReadings,
    default_pad_layout,
    fuse_pad_position,
    guard_sequence,
    initial_eus,
    render_detections,
    simulate_sensors,
    switch_source,
    update_eus,
)
from hoversil.mathutil import QUAT_IDENTITY, ZERO3, quat_from_axis_angle, vnorm, vsub

from oracles import brute_force_pad_estimate


def truth_at(position, attitude=QUAT_IDENTITY, velocity=ZERO3, rates=ZERO3, t=0.0):
    return RigidBodyState(position=position, velocity=velocity, attitude=attitude, body_rates=rates, time=t)


def level_eus(position, t=0.0, source=AltitudeSource.BARO):
    return EstimatedUavState(
        position=position,
        velocity=ZERO3,
        attitude=QUAT_IDENTITY,
        body_rates=ZERO3,
        altitude=position[2],
        source=source,
        timestamp=t,
    )


class TestSimulateSensors:
    def test_zero_noise_equals_truth(self):
        noise = NoiseConfig(
            sigma_gps=0.0, sigma_baro=0.0, sigma_accel=0.0,
            sigma_gyro=0.0, sigma_heading=0.0, sigma_ir=0.0,
        )
        truth = truth_at((1.0, -2.0, 5.0), rates=(0.1, 0.0, -0.2))
        r = simulate_sensors(truth, noise, np.random.default_rng(0))
        assert r.gps == (1.0, -2.0, 5.0)
        assert r.baro == 5.0
        assert r.gyro == pytest.approx((0.1, 0.0, -0.2))
        # stationary level vehicle: specific force is +g up the body z axis
        assert r.accel == pytest.approx((0.0, 0.0, 9.81))
        assert r.heading == 0.0

    def test_gps_sigma_statistics(self):
        noise = NoiseConfig(sigma_gps=1.0)
        rng = np.random.default_rng(7)
        truth = truth_at((0.0, 0.0, 10.0))
        xs = [simulate_sensors(truth, noise, rng).gps[0] for _ in range(10_000)]
        assert abs(float(np.std(xs)) - 1.0) < 0.05

    def test_ir_absent_when_disabled(self):
        truth = truth_at((0.0, 0.0, 3.0))
        r = simulate_sensors(truth, NoiseConfig(ir_enabled=False), np.random.default_rng(1))
        assert r.ir is None

    def test_ir_present_only_in_beacon_range(self):
        near = truth_at((0.0, 0.0, 3.0))
        far = truth_at((0.0, 0.0, 30.0))
        cfg = NoiseConfig(ir_enabled=True, ir_beacon=ZERO3, ir_range=20.0)
        assert simulate_sensors(near, cfg, np.random.default_rng(1)).ir is not None
        assert simulate_sensors(far, cfg, np.random.default_rng(1)).ir is None

    def test_draw_count_fixed_regardless_of_ir(self):
        # Both configs must consume the same stream: next draw after the
        # call is identical whether or not the IR channel reported.
        truth = truth_at((0.0, 0.0, 3.0))
        rng_a = np.random.default_rng(5)
        rng_b = np.random.default_rng(5)
        simulate_sensors(truth, NoiseConfig(ir_enabled=False), rng_a)
        simulate_sensors(truth, NoiseConfig(ir_enabled=True, ir_range=20.0), rng_b)
        assert rng_a.standard_normal() == rng_b.standard_normal()

    def test_gps_bias_added(self):
        noise = NoiseConfig(sigma_gps=0.0, sigma_baro=0.0, sigma_accel=0.0,
                            sigma_gyro=0.0, sigma_heading=0.0, sigma_ir=0.0,
                            gps_bias=(1.5, -0.5, 0.2))
        r = simulate_sensors(truth_at((0.0, 0.0, 5.0)), noise, np.random.default_rng(0))
        assert r.gps == (1.5, -0.5, 5.2)


class TestRenderDetections:
    CAM = CameraConfig(p_base=1.0, noise_base=0.0)

    def test_full_occlusion_empty(self):
        layout = default_pad_layout()
        truth = truth_at((0.0, 0.0, 3.0))
        occ = {m.id: 1.0 for m in layout.markers}
        f = render_detections(truth, layout, self.CAM, 1.0, occ, np.random.default_rng(0), 0.0, 0)
        assert f.detections == ()

    def test_all_markers_seen_overhead(self):
        layout = default_pad_layout()
        truth = truth_at((0.0, 0.0, 3.0))
        f = render_detections(truth, layout, self.CAM, 1.0, {}, np.random.default_rng(0), 0.0, 0)
        assert sorted(d.marker_id for d in f.detections) == ["M0", "M1", "M2", "M3", "M4", "M5"]

    def test_zero_noise_measurement_exact(self):
        layout = PadLayout(markers=(Marker("M0", 0.8, (0.0, 0.0)),))
        truth = truth_at((0.0, 0.0, 4.0))
        f = render_detections(truth, layout, self.CAM, 1.0, {}, np.random.default_rng(0), 0.0, 0)
        (d,) = f.detections
        assert d.relative == pytest.approx((0.0, 0.0, -4.0))
        assert d.apparent_size == pytest.approx(0.2)

    def test_out_of_fov_not_detected(self):
        layout = PadLayout(markers=(Marker("M0", 0.8, (0.0, 0.0)),))
        # marker far to the side at low altitude: outside the 45 degree cone
        truth = truth_at((5.0, 0.0, 1.0))
        f = render_detections(truth, layout, self.CAM, 1.0, {}, np.random.default_rng(0), 0.0, 0)
        assert f.detections == ()

    def test_below_resolvability_not_detected(self):
        layout = PadLayout(markers=(Marker("M0", 0.1, (0.0, 0.0)),))
        truth = truth_at((0.0, 0.0, 10.0))  # apparent 0.01 < 0.015
        f = render_detections(truth, layout, self.CAM, 1.0, {}, np.random.default_rng(0), 0.0, 0)
        assert f.detections == ()

    def test_lighting_sweep_monotone(self):
        layout = default_pad_layout()
        cam = CameraConfig()
        truth = truth_at((0.0, 0.0, 5.0))
        counts = []
        for lighting in (1.0, 0.7, 0.4, 0.1):
            rng = np.random.default_rng(42)  # paired draws across levels
            total = 0
            for k in range(1000):
                f = render_detections(truth, layout, cam, lighting, {}, rng, 0.05 * k, k)
                total += len(f.detections)
            counts.append(total)
        assert counts == sorted(counts, reverse=True)

    def test_occlusion_monotone_paired(self):
        layout = default_pad_layout()
        cam = CameraConfig()
        truth = truth_at((0.0, 0.0, 5.0))
        totals = []
        for frac in (0.0, 0.3, 0.6, 0.9):
            rng = np.random.default_rng(9)
            occ = {m.id: frac for m in layout.markers}
            totals.append(sum(
                len(render_detections(truth, layout, cam, 1.0, occ, rng, 0.05 * k, k).detections)
                for k in range(1000)
            ))
        assert totals == sorted(totals, reverse=True)


class TestGuard:
    def test_first_frame_accepted(self):
        assert guard_sequence(CameraFrame(0.1, 0), (-math.inf, -1)).accepted

    def test_out_of_order_rejected(self):
        last = (-math.inf, -1)
        frames = [CameraFrame(0.1, 1), CameraFrame(0.3, 3), CameraFrame(0.2, 2)]
        accepted = []
        for f in frames:
            d = guard_sequence(f, last)
            if d.accepted:
                accepted.append(f.seq)
                last = (f.timestamp, f.seq)
        assert accepted == [1, 3]

    def test_duplicate_seq_rejected(self):
        d = guard_sequence(CameraFrame(0.2, 5), (0.1, 5))
        assert not d.accepted and "sequence" in d.reason


class TestFusion:
    def test_weighted_mean_example(self):
        # candidates (0,0,0) w=2 and (0.3,0,0) w=1 -> (0.1,0,0)
        layout = PadLayout(markers=(Marker("A", 1.0, (0.0, 0.0)), Marker("B", 1.0, (0.0, 0.0))))
        eus = level_eus((0.0, 0.0, 0.0))
        frame = CameraFrame(1.0, 0, (
            MarkerDetection("A", ZERO3, apparent_size=2.0, confidence=1.0),
            MarkerDetection("B", (0.3, 0.0, 0.0), apparent_size=1.0, confidence=1.0),
        ))
        est = fuse_pad_position(frame, layout, eus, tagging=False)
        assert est.position == pytest.approx((0.1, 0.0, 0.0))
        assert est.weight_sum == pytest.approx(3.0)

    def test_tagging_discards_unknown_id(self):
        layout = PadLayout(markers=(Marker("M0", 0.8, (0.0, 0.0)),))
        eus = level_eus((0.0, 0.0, 5.0))
        frame = CameraFrame(1.0, 0, (MarkerDetection("X9", (1.0, 0.0, -5.0), 0.5, 1.0),))
        assert fuse_pad_position(frame, layout, eus, tagging=True) is None
        est = fuse_pad_position(frame, layout, eus, tagging=False)
        assert est is not None and est.marker_ids == ("X9",)

    def test_empty_frame_returns_none(self):
        layout = default_pad_layout()
        assert fuse_pad_position(CameraFrame(1.0, 0), layout, level_eus((0, 0, 5.0)), False) is None

    def test_marker_offset_subtracted(self):
        layout = PadLayout(markers=(Marker("M1", 0.24, (0.6, 0.0)),), center=(3.0, 2.0, 0.0))
        eus = level_eus((3.0, 2.0, 4.0))
        frame = CameraFrame(1.0, 0, (MarkerDetection("M1", (0.6, 0.0, -4.0), 0.06, 0.9),))
        est = fuse_pad_position(frame, layout, eus, tagging=True)
        assert est.position == pytest.approx((3.0, 2.0, 0.0))

    def _random_case(self, rng):
        n = int(rng.integers(1, 6))
        markers = tuple(
            Marker("M%d" % i, float(rng.uniform(0.1, 1.0)),
                   (float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1))))
            for i in range(n)
        )
        layout = PadLayout(markers=markers, center=tuple(rng.uniform(-5, 5, 3)))
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        q = quat_from_axis_angle(tuple(axis), float(rng.uniform(-0.4, 0.4)))
        eus = EstimatedUavState(
            position=tuple(rng.uniform(-10, 10, 3)),
            velocity=ZERO3, attitude=q, body_rates=ZERO3,
            altitude=0.0, source=AltitudeSource.BARO, timestamp=0.0,
        )
        dets = tuple(
            MarkerDetection(m.id, tuple(rng.uniform(-8, 8, 3)),
                            float(rng.uniform(0.02, 1.5)), float(rng.uniform(0.05, 1.0)))
            for m in markers
        )
        return layout, eus, CameraFrame(1.0, 0, dets)

    def test_brute_force_oracle_100_cases(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            layout, eus, frame = self._random_case(rng)
            est = fuse_pad_position(frame, layout, eus, tagging=True)
            oracle = brute_force_pad_estimate(frame, layout, eus)
            assert est is not None
            assert max(abs(a - b) for a, b in zip(est.position, oracle)) < 1e-9

    def test_permutation_invariance(self):
        rng = np.random.default_rng(77)
        layout, eus, frame = self._random_case(rng)
        est = fuse_pad_position(frame, layout, eus, tagging=True)
        shuffled = CameraFrame(frame.timestamp, frame.seq, tuple(reversed(frame.detections)))
        est2 = fuse_pad_position(shuffled, layout, eus, tagging=True)
        assert est2.position == pytest.approx(est.position, abs=1e-12)

    def test_single_marker_identity(self):
        rng = np.random.default_rng(88)
        layout, eus, frame = self._random_case(rng)
        one = CameraFrame(frame.timestamp, frame.seq, frame.detections[:1])
        est = fuse_pad_position(one, layout, eus, tagging=True)
        assert est.position == pytest.approx(brute_force_pad_estimate(one, layout, eus), abs=1e-12)

    @given(scale=st.floats(min_value=1e-3, max_value=1e3))
    @settings(max_examples=30, deadline=None)
    def test_weight_scale_invariance(self, scale):
        layout = PadLayout(markers=(Marker("A", 1.0, (0.2, 0.0)), Marker("B", 0.5, (-0.2, 0.1))))
        eus = level_eus((1.0, 2.0, 6.0))
        base = (
            MarkerDetection("A", (0.1, -0.2, -6.0), 0.4, 0.8),
            MarkerDetection("B", (-0.3, 0.3, -6.0), 0.2, 0.6),
        )
        scaled = tuple(
            MarkerDetection(d.marker_id, d.relative, d.apparent_size * scale, d.confidence)
            for d in base
        )
        a = fuse_pad_position(CameraFrame(1.0, 0, base), layout, eus, True)
        b = fuse_pad_position(CameraFrame(1.0, 0, scaled), layout, eus, True)
        assert b.position == pytest.approx(a.position, abs=1e-9)


class TestSwitchSource:
    def test_above_threshold_baro(self):
        assert switch_source(12.0, 10.0, None, None) is AltitudeSource.BARO

    def test_below_threshold_vision(self):
        pad = LandingPadEstimate(ZERO3, 1.0, 0.0, ("M0",))
        assert switch_source(8.0, 10.0, pad, None) is AltitudeSource.VISION

    def test_ir_overrides_biased_belief(self):
        # belief says 8 m (true 15), IR reads 15: stay on Baro
        assert switch_source(8.0, 10.0, None, 15.0) is AltitudeSource.BARO

    def test_below_threshold_ir_without_vision(self):
        assert switch_source(8.0, 10.0, None, 8.0) is AltitudeSource.IR

    def test_hysteresis_band(self):
        pad = LandingPadEstimate(ZERO3, 1.0, 0.0, ("M0",))
        # once in Vision, 10.2 m does not revert (below threshold + band)
        assert switch_source(10.2, 10.0, pad, None, prev=AltitudeSource.VISION) is AltitudeSource.VISION
        # but from Baro the same altitude stays Baro
        assert switch_source(10.2, 10.0, pad, None, prev=AltitudeSource.BARO) is AltitudeSource.BARO
        assert switch_source(10.6, 10.0, pad, None, prev=AltitudeSource.VISION) is AltitudeSource.BARO

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            switch_source(5.0, 0.0, None, None)


class TestUpdateEus:
    ZERO_NOISE = NoiseConfig(sigma_gps=0.0, sigma_baro=0.0, sigma_accel=0.0,
                             sigma_gyro=0.0, sigma_heading=0.0, sigma_ir=0.0)

    def test_convergence_zero_noise(self):
        # stationary truth, estimate booted a couple dm off: within 1e-3 after 1 s
        cfg = EstimatorConfig()
        truth = truth_at((1.0, -1.0, 5.0))
        rng = np.random.default_rng(0)
        eus = level_eus((1.15, -1.15, 5.2))
        dt = 0.002
        for k in range(500):
            r = simulate_sensors(truth_at((1.0, -1.0, 5.0), t=k * dt), self.ZERO_NOISE, rng)
            eus = update_eus(r, None, AltitudeSource.BARO, eus, dt, cfg)
        assert vnorm(vsub(eus.position, truth.position)) < 1e-3
        assert vnorm(eus.velocity) < 0.02

    def test_dead_reckoning_divergence_monotone(self):
        # no GPS and no vision: xy error can only grow
        cfg = EstimatorConfig()
        noise = NoiseConfig(sigma_gps=0.0, sigma_baro=0.0, sigma_accel=0.0,
                            sigma_gyro=0.0, sigma_heading=0.0, gps_valid=False)
        eus = level_eus((0.1, 0.0, 5.0))
        eus = EstimatedUavState(
            position=eus.position, velocity=(0.05, 0.0, 0.0), attitude=eus.attitude,
            body_rates=ZERO3, altitude=5.0, source=AltitudeSource.BARO, timestamp=0.0,
        )
        rng = np.random.default_rng(0)
        errs = []
        for k in range(1000):
            r = simulate_sensors(truth_at((0.0, 0.0, 5.0), t=k * 0.002), noise, rng)
            eus = update_eus(r, None, AltitudeSource.BARO, eus, 0.002, cfg)
            errs.append(abs(eus.position[0]))
        assert all(b >= a - 1e-12 for a, b in zip(errs, errs[1:]))

    def test_vision_innovation_cancels_gps_bias(self):
        # baro biased low via gps-free channel: vision pins z back to truth
        cfg = EstimatorConfig(pad_surveyed=(0.0, 0.0, 0.0))
        truth_pos = (0.0, 0.0, 5.0)
        eus = level_eus((0.0, 0.0, 2.0), source=AltitudeSource.VISION)  # belief 3 m low
        rng = np.random.default_rng(0)
        dt = 0.002
        for k in range(4000):
            r = simulate_sensors(truth_at(truth_pos, t=k * dt), self.ZERO_NOISE, rng)
            pad = None
            if k % 25 == 0:  # 20 Hz fusion events
                # perfect relative measurement: pad appears 3 m low in the
                # biased frame, innovation pulls the estimate up
                err = vsub(eus.position, truth_pos)
                pad = LandingPadEstimate((err[0], err[1], err[2]), 1.0, k * dt, ("M0",))
            eus = update_eus(r, pad, AltitudeSource.VISION, eus, dt, cfg)
        assert abs(eus.position[2] - 5.0) < 0.02

    def test_source_tag_recorded(self):
        cfg = EstimatorConfig()
        r = simulate_sensors(truth_at((0.0, 0.0, 5.0)), self.ZERO_NOISE, np.random.default_rng(0))
        eus = update_eus(r, None, AltitudeSource.IR, level_eus((0, 0, 5.0)), 0.002, cfg)
        assert eus.source is AltitudeSource.IR

    def test_ir_channel_tracks_ir_reading(self):
        cfg = EstimatorConfig()
        noise = NoiseConfig(sigma_gps=0.0, sigma_baro=0.0, sigma_accel=0.0,
                            sigma_gyro=0.0, sigma_heading=0.0, sigma_ir=0.0,
                            ir_enabled=True, ir_range=50.0)
        eus = level_eus((0.0, 0.0, 6.0))
        rng = np.random.default_rng(0)
        for k in range(1500):
            r = simulate_sensors(truth_at((0.0, 0.0, 3.0), t=k * 0.002), noise, rng)
            # baro says 3 as well here, so bias the reading artificially
            r = type(r)(gps=r.gps, gps_valid=r.gps_valid, baro=7.5, accel=r.accel,
                        gyro=r.gyro, heading=r.heading, ir=r.ir, timestamp=r.timestamp)
            eus = update_eus(r, None, AltitudeSource.IR, eus, 0.002, cfg)
        # altitude follows IR (3.0), not the biased baro (7.5)
        assert abs(eus.altitude - 3.0) < 0.05

    def test_bad_dt(self):
        cfg = EstimatorConfig()
        r = simulate_sensors(truth_at((0, 0, 1.0)), self.ZERO_NOISE, np.random.default_rng(0))
        with pytest.raises(ValueError):
            update_eus(r, None, AltitudeSource.BARO, level_eus((0, 0, 1.0)), 0.0, cfg)


class TestLayout:
    def test_primary_only_keeps_largest(self):
        assert default_pad_layout().primary_only().markers[0].id == "M0"

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            PadLayout(markers=(Marker("A", 1.0, (0, 0)), Marker("A", 0.5, (1, 0))))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            PadLayout(markers=())

    def test_initial_eus_from_readings(self):
        r = SensorReadings(gps=(1.0, 2.0, 9.0), gps_valid=True, baro=3.0,
                           accel=(0, 0, 9.81), gyro=ZERO3, heading=0.5, ir=None, timestamp=0.0)
        eus = initial_eus(r, EstimatorConfig())
        assert eus.position == (1.0, 2.0, 3.0)
        assert eus.source is AltitudeSource.BARO
        assert math.isclose(2.0 * math.atan2(eus.attitude[3], eus.attitude[0]), 0.5)
