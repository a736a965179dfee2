import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_trace
from infrasense.features import FramePlan, feature_matrix
from infrasense.road_analysis import (
    QuarterCar,
    RoadAnalysisError,
    StepInstabilityError,
    classify_maneuvers,
    detect_anomalies,
    quarter_car_states,
    robust_z,
    roughness_index,
    simulate_quarter_car,
)
from infrasense.synth import PROFILE_SPACING, Pothole, Sinusoid, SynthSpec, generate_trace
from infrasense.trace_model import CapabilityError


class TestRobustZ:
    def test_zero_dispersion_flagged(self):
        z, flat = robust_z(np.full(10, 4.2))
        assert flat
        assert np.all(z == 0.0)

    @given(a=st.floats(0.1, 50.0), b=st.floats(-100.0, 100.0))
    @settings(max_examples=30)
    def test_positive_affine_invariance(self, a, b):
        x = np.array([1.0, 2.0, 2.5, 3.0, 8.0, 2.2, 1.7])
        z0, _ = robust_z(x)
        z1, _ = robust_z(a * x + b)
        assert np.allclose(z0, z1, atol=1e-9)

    def test_known_value(self):
        x = np.array([1.0, 2.0, 3.0, 4.0, 100.0])
        z, flat = robust_z(x)  # median 3, MAD 1
        assert not flat
        assert z[0] == pytest.approx(-2.0 / 1.4826)
        assert z[4] == pytest.approx(97.0 / 1.4826)


def spiky_matrix(rng, spikes=(450,), n=3000, rate=100.0):
    sig = rng.normal(scale=0.1, size=n)
    for s in spikes:
        sig[s] += 8.0
    trace = make_trace(duration=(n - 1) / rate, rate=rate)
    m = feature_matrix(sig, FramePlan(1.0, 0.5, rate))
    return m, trace.fixes


class TestDetectAnomalies:
    def test_single_spike_found(self, rng):
        m, fixes = spiky_matrix(rng)
        res = detect_anomalies(m, fixes)
        assert len(res.indicators) == 1
        ind = res.indicators[0]
        assert ind.kind == "anomaly"
        # sample 450 at 100 Hz -> t = 4.5 s; peak window should cover it
        assert abs(ind.t - 4.5) <= 1.0
        assert 0.0 < ind.confidence <= 1.0
        assert ind.severity >= 1

    def test_two_spikes_ordered(self, rng):
        m, fixes = spiky_matrix(rng, spikes=(450, 2250))
        res = detect_anomalies(m, fixes)
        assert len(res.indicators) == 2
        assert res.indicators[0].t < res.indicators[1].t

    def test_synthetic_potholes_no_false_positives(self):
        # quarter-car ride over three dips + sensor noise: exactly the
        # injected anomalies should surface, on every seed
        for seed in range(3):
            spec = SynthSpec(duration=60.0, speed=10.0, seed=seed, noise_sigma=0.05,
                             potholes=(Pothole(100.0, 0.04, 0.5),
                                       Pothole(300.0, 0.05, 0.5),
                                       Pothole(480.0, 0.06, 0.5)))
            trace = generate_trace(spec)
            m = feature_matrix(trace.accel[:, 2] + 9.81, FramePlan(3.0, 1 / 3, spec.rate))
            res = detect_anomalies(m, trace.fixes, k=3.0)
            assert len(res.indicators) == 3

    def test_contiguous_windows_merge(self, rng):
        # a long burst spans several windows but yields one indicator
        n = 3000
        sig = rng.normal(scale=0.1, size=n)
        sig[1400:1600] += 6.0 * np.sin(np.arange(200))
        m = feature_matrix(sig, FramePlan(1.0, 0.5, 100.0))
        fixes = make_trace(duration=29.99).fixes
        res = detect_anomalies(m, fixes)
        assert len(res.indicators) == 1

    def test_degenerate_flag(self):
        m = feature_matrix(np.zeros(3000), FramePlan(1.0, 0.5, 100.0))
        res = detect_anomalies(m, [])
        assert res.degenerate
        assert res.indicators == []

    def test_too_few_windows(self):
        m = feature_matrix(np.zeros(300), FramePlan(1.0, 0.0, 100.0))
        with pytest.raises(RoadAnalysisError):
            detect_anomalies(m, [])

    def test_missing_feature(self, rng):
        m = feature_matrix(rng.normal(size=3000), FramePlan(1.0, 0.5, 100.0), ("mean",))
        with pytest.raises(RoadAnalysisError):
            detect_anomalies(m, [])


def gyro_trace(wz, rate=100.0, lat_accel=None):
    n = len(wz)
    gyro = np.zeros((n, 3))
    gyro[:, 2] = wz
    trace = make_trace(duration=(n - 1) / rate, rate=rate, gyro=gyro)
    if lat_accel is not None:
        trace.accel[:, 1] += lat_accel
    return trace


class TestClassifyManeuvers:
    def test_needs_gyro(self):
        with pytest.raises(CapabilityError):
            classify_maneuvers(make_trace())

    def test_quiet_trace_no_events(self):
        n = 2001
        out = classify_maneuvers(gyro_trace(np.zeros(n)))
        assert out == []

    def test_turn(self):
        t = np.arange(0, 20, 0.01)
        wz = np.where((t >= 5) & (t < 10), 0.3, 0.0)  # 1.5 rad ~ 86 deg
        out = classify_maneuvers(gyro_trace(wz))
        assert [i.sub_kind for i in out] == ["turn"]
        assert out[0].value == pytest.approx(1.5, abs=0.02)

    def test_u_turn(self):
        t = np.arange(0, 20, 0.01)
        wz = np.where((t >= 5) & (t < 12), 0.5, 0.0)  # 3.5 rad ~ 200 deg
        out = classify_maneuvers(gyro_trace(wz))
        assert [i.sub_kind for i in out] == ["u_turn"]

    def test_lane_change_two_lobes_one_event(self):
        t = np.arange(0, 20, 0.01)
        wz = np.zeros_like(t)
        seg = (t >= 5) & (t < 9)
        wz[seg] = 0.3 * np.sin(2 * np.pi * (t[seg] - 5) / 4.0)  # one full period
        out = classify_maneuvers(gyro_trace(wz))
        assert [i.sub_kind for i in out] == ["lane_change"]

    def test_swerve_needs_lateral_acceleration(self):
        t = np.arange(0, 20, 0.01)
        wz = np.zeros_like(t)
        seg = (t >= 5) & (t < 9)
        wz[seg] = 0.3 * np.sin(2 * np.pi * (t[seg] - 5) / 4.0)
        lat = np.where(seg, 3.0 * np.sin(2 * np.pi * (t - 5) / 4.0), 0.0)
        out = classify_maneuvers(gyro_trace(wz, lat_accel=lat))
        assert [i.sub_kind for i in out] == ["swerve"]

    def test_curvy_segment(self):
        t = np.arange(0, 30, 0.01)
        wz = np.zeros_like(t)
        seg = (t >= 5) & (t < 21)
        wz[seg] = 0.2 * np.sin(2 * np.pi * (t[seg] - 5) / 4.0)  # 4 periods
        out = classify_maneuvers(gyro_trace(wz))
        assert [i.sub_kind for i in out] == ["curvy_segment"]

    def test_sub_threshold_rotation_ignored(self):
        t = np.arange(0, 20, 0.01)
        wz = np.full_like(t, 0.02)  # below omega_on
        assert classify_maneuvers(gyro_trace(wz)) == []

    def test_event_position_and_severity(self):
        t = np.arange(0, 20, 0.01)
        wz = np.where((t >= 8) & (t < 13), 0.3, 0.0)
        out = classify_maneuvers(gyro_trace(wz))
        assert out[0].t == pytest.approx(10.5, abs=0.5)
        assert out[0].severity == pytest.approx(86, abs=3)


def synth_trace(amp=0.005, wavelength=4.0, duration=65.0, speed=10.0, seed=0):
    spec = SynthSpec(duration=duration, speed=speed, seed=seed,
                     sinusoids=(Sinusoid(amplitude_m=amp, wavelength_m=wavelength),))
    return generate_trace(spec)


class TestRoughnessIndex:
    def test_flat_road_near_zero(self):
        trace = generate_trace(SynthSpec(duration=65.0))
        reports, skipped = roughness_index(trace)
        assert len(reports) >= 5
        assert all(r.index < 1e-6 for r in reports)

    def test_amplitude_doubling_doubles_index(self):
        a = roughness_index(synth_trace(amp=0.004))[0]
        b = roughness_index(synth_trace(amp=0.008))[0]
        assert len(a) == len(b) >= 5
        for ra, rb in zip(a, b):
            assert rb.index == pytest.approx(2.0 * ra.index, rel=0.05)

    def test_segments_of_identical_road_agree(self):
        reports, _ = roughness_index(synth_trace())
        vals = [r.index for r in reports[1:-1]]  # skip edge transients
        assert max(vals) - min(vals) < 0.15 * np.mean(vals)

    def test_segment_positions(self):
        reports, _ = roughness_index(synth_trace())
        assert [r.s_start for r in reports] == [100.0 * i for i in range(len(reports))]

    def test_needs_speed(self):
        trace = make_trace(with_fixes=False)
        with pytest.raises(RoadAnalysisError):
            roughness_index(trace)

    def test_bad_segment_length(self):
        with pytest.raises(ValueError):
            roughness_index(make_trace(), segment_length=0.0)


class TestQuarterCar:
    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            QuarterCar(suspension_stiffness=-1.0)
        with pytest.raises(ValueError):
            QuarterCar(mass_ratio=0.0)

    def test_flat_profile_zero_response(self):
        accel = simulate_quarter_car(np.zeros(2000), PROFILE_SPACING, 10.0)
        assert np.max(np.abs(accel)) < 1e-9

    def test_linearity(self):
        rng = np.random.default_rng(3)
        profile = 0.002 * rng.normal(size=2000)
        a = simulate_quarter_car(profile, PROFILE_SPACING, 10.0, rate=200.0)
        b = simulate_quarter_car(3.0 * profile, PROFILE_SPACING, 10.0, rate=200.0)
        assert np.allclose(b, 3.0 * a, atol=1e-9)

    def test_pothole_response_peaks_at_pothole(self):
        profile = np.zeros(4000)  # 200 m
        profile[2000:2010] = -0.05  # dip at 100 m
        accel = simulate_quarter_car(profile, PROFILE_SPACING, 10.0, rate=200.0)
        t_peak = np.argmax(np.abs(accel)) / 200.0
        assert t_peak == pytest.approx(10.0, abs=0.3)

    def test_step_rate_convergence(self):
        profile = np.zeros(2000)
        profile[1000:1010] = -0.05
        coarse = simulate_quarter_car(profile, PROFILE_SPACING, 10.0, rate=500.0)
        fine = simulate_quarter_car(profile, PROFILE_SPACING, 10.0, rate=1000.0)
        assert np.max(np.abs(coarse)) == pytest.approx(np.max(np.abs(fine)), rel=0.05)

    def test_undamped_energy_conserved(self):
        p = QuarterCar(damping=0.0)
        states, _ = quarter_car_states(lambda t: 0.0, 10.0, p, 1000.0,
                                       init=(0.01, 0.0, 0.0, 0.0))
        zs, vs, zu, vu = states.T
        energy = (0.5 * vs ** 2 + 0.5 * p.mass_ratio * vu ** 2
                  + 0.5 * p.suspension_stiffness * (zs - zu) ** 2
                  + 0.5 * p.tire_stiffness * zu ** 2)
        assert np.max(np.abs(energy - energy[0])) <= 0.01 * energy[0]

    def test_instability_detected(self):
        t = np.arange(0, 100, PROFILE_SPACING)
        profile = 0.01 * np.sin(2 * np.pi * t / 5.0)
        with pytest.raises(StepInstabilityError):
            simulate_quarter_car(profile, PROFILE_SPACING, 10.0, rate=14.0)
