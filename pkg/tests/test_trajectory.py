import math

import numpy as np
import pytest

from vruradar.simulator import Perturbation, preset, simulate_scenario
from vruradar.trajectory import (
    FusionParams,
    GnssQuality,
    GnssSample,
    ImuSample,
    OutOfRangeError,
    ReferenceTrajectory,
    TrajectoryState,
    build_fused_trajectory,
    build_trajectory,
    fuse_gnss_imu,
    interpolate_pose,
    moving_average,
    smooth_gnss,
)
from dataclasses import replace


# --- moving average --------------------------------------------------------

def test_moving_average_constant():
    assert moving_average([2.0] * 7, 9) == pytest.approx([2.0] * 7)


def test_moving_average_ramp_interior():
    ramp = np.arange(10.0)
    out = moving_average(ramp, 5)
    assert out[2:-2] == pytest.approx(ramp[2:-2])


def test_moving_average_hand_computed_edges():
    out = moving_average([0.0, 3.0, 0.0, 3.0, 0.0], 3)
    assert out == pytest.approx([1.5, 1.0, 2.0, 1.0, 1.5])


def test_moving_average_empty_and_validation():
    assert moving_average([], 9).size == 0
    with pytest.raises(ValueError):
        moving_average([1.0], 4)
    with pytest.raises(ValueError):
        moving_average([1.0], 0)


def test_moving_average_2d_matches_columns():
    rng = np.random.default_rng(0)
    arr = rng.normal(size=(20, 2))
    out = moving_average(arr, 5)
    assert out[:, 0] == pytest.approx(moving_average(arr[:, 0], 5))
    assert out[:, 1] == pytest.approx(moving_average(arr[:, 1], 5))


def test_default_window_duration_matches_stream_rates():
    # 9 samples should span ~0.5 s of GNSS and ~0.1 s of IMU data
    cfg = preset("pedestrian-nominal")
    assert 9 / cfg.gnss_rate == pytest.approx(0.5, rel=0.1)
    assert 9 / cfg.imu_rate == pytest.approx(0.1, rel=0.1)


# --- spline interpolation ----------------------------------------------------

def test_spline_passes_through_knots():
    rng = np.random.default_rng(1)
    times = np.linspace(0, 10, 40)
    xy = rng.normal(0, 3, (40, 2))
    traj = ReferenceTrajectory(times, xy)
    for t, p in zip(times[::5], xy[::5]):
        assert traj.position_at(t) == pytest.approx(p, abs=1e-9)


def test_straight_line_speed_and_yaw():
    times = np.linspace(0, 5, 26)
    xy = np.stack([2.0 * times, np.zeros_like(times)], axis=1)
    traj = ReferenceTrajectory(times, xy)
    st = interpolate_pose(traj, 2.37)
    assert st.speed == pytest.approx(2.0, abs=1e-6)
    assert st.pose.yaw == pytest.approx(0.0, abs=1e-9)


def test_circle_interpolation_under_1mm():
    # dense knots on an analytic circle; query between knots
    radius, omega = 5.0, 0.5
    times = np.arange(0, 12.0, 0.1)
    xy = np.stack([radius * np.cos(omega * times), radius * np.sin(omega * times)], axis=1)
    traj = ReferenceTrajectory(times, xy)
    for t in np.linspace(0.5, 11.0, 57):
        expect = [radius * math.cos(omega * t), radius * math.sin(omega * t)]
        assert np.linalg.norm(traj.position_at(t) - expect) < 1e-3


def test_out_of_range_raises():
    traj = ReferenceTrajectory([0.0, 1.0, 2.0], [[0, 0], [1, 0], [2, 0]])
    with pytest.raises(OutOfRangeError):
        traj.state_at(-0.1)
    with pytest.raises(OutOfRangeError):
        traj.state_at(2.1)


def test_yaw_rate_from_curvature_on_circle():
    radius, omega = 5.0, 0.5
    times = np.arange(0, 12.0, 0.05)
    xy = np.stack([radius * np.cos(omega * times), radius * np.sin(omega * times)], axis=1)
    traj = ReferenceTrajectory(times, xy)
    st = traj.state_at(6.0)
    assert st.yaw_rate == pytest.approx(omega, rel=1e-3)


def test_yaw_hold_at_standstill():
    # move right, then stop: yaw must hold the last moving direction, not NaN
    t1 = np.linspace(0, 5, 51)
    xy1 = np.stack([t1, np.zeros_like(t1)], axis=1)
    t2 = np.linspace(5.1, 10, 50)
    xy2 = np.tile(xy1[-1], (50, 1))
    times = np.concatenate([t1, t2])
    xy = np.vstack([xy1, xy2])
    traj = ReferenceTrajectory(times, xy)
    st = traj.state_at(8.0)
    assert st.speed < 0.05
    assert math.isfinite(st.pose.yaw)
    assert st.pose.yaw == pytest.approx(0.0, abs=0.2)


def test_smooth_gnss_preserves_metadata():
    samples = [GnssSample(timestamp=k * 0.1, x=float(k), y=0.0) for k in range(10)]
    out = smooth_gnss(samples, 3)
    assert [s.timestamp for s in out] == [s.timestamp for s in samples]
    assert all(s.quality == GnssQuality.FIX_RTK for s in out)


# --- fusion -------------------------------------------------------------------

def test_fusion_rejects_empty_and_disjoint():
    gnss = [GnssSample(timestamp=0.0, x=0, y=0), GnssSample(timestamp=1.0, x=0, y=0)]
    imu = [ImuSample(timestamp=5.0, yaw_rate=0, accel_forward=0)]
    with pytest.raises(ValueError):
        fuse_gnss_imu([], imu)
    with pytest.raises(ValueError):
        fuse_gnss_imu(gnss, imu)


def test_fusion_clean_matches_smoothed_gnss():
    cfg = preset("pedestrian-nominal", seed=3)
    data = simulate_scenario(cfg)
    tg = build_trajectory(data.gnss)
    tf = build_fused_trajectory(data.gnss, data.imu, FusionParams())
    tq = np.linspace(1.0, cfg.duration - 1.0, 400)
    pg = np.array([tg.position_at(t) for t in tq])
    pf = np.array([tf.position_at(t) for t in tq])
    rms = math.sqrt(np.mean(np.sum((pf - pg) ** 2, axis=1)))
    assert rms < 0.05


def test_fusion_rides_out_gnss_bias_window():
    # a 2 m bias held for 3 s: the gated filter coasts within 0.5 m while the
    # pure GNSS position follows the full excursion
    cfg = replace(
        preset("cyclist-nominal", seed=1),
        perturbation=Perturbation(start=25.0, duration=3.0, bias=(1.2, -1.6)),
    )
    data = simulate_scenario(cfg)
    states = fuse_gnss_imu(data.gnss, data.imu, FusionParams())
    ts = np.array([s.timestamp for s in states])
    xy = np.array([[s.pose.x, s.pose.y] for s in states])
    truth = np.array(
        [[data.course.state_at(t).pose.x, data.course.state_at(t).pose.y] for t in ts]
    )
    err = np.linalg.norm(xy - truth, axis=1)
    sel = (ts >= 24.0) & (ts <= 34.0)
    assert err[sel].max() < 0.5
    tg = build_trajectory(data.gnss)
    pg = np.array([tg.position_at(t) for t in ts[sel]])
    err_g = np.linalg.norm(pg - truth[sel], axis=1)
    assert err_g.max() > 1.5


def test_fusion_standstill_freeze():
    gnss = [GnssSample(timestamp=k / 18.0, x=5.0, y=-2.0) for k in range(181)]
    imu = [ImuSample(timestamp=k / 90.0, yaw_rate=0.0, accel_forward=0.0) for k in range(901)]
    states = fuse_gnss_imu(gnss, imu)
    assert len({(s.pose.x, s.pose.y) for s in states}) == 1
    assert all(s.speed == 0.0 for s in states)


def test_fusion_skips_degraded_fixes():
    # flagged samples must not pull the estimate even inside the gate
    base = [GnssSample(timestamp=k / 18.0, x=1.4 * k / 18.0, y=0.0) for k in range(181)]
    flagged = [
        replace(s, y=0.4, quality=GnssQuality.DEGRADED) if 4.0 <= s.timestamp <= 6.0 else s
        for s in base
    ]
    imu = [ImuSample(timestamp=k / 90.0, yaw_rate=0.0, accel_forward=0.0) for k in range(901)]
    states = fuse_gnss_imu(flagged, imu)
    mid = [s for s in states if 4.5 <= s.timestamp <= 6.0]
    assert max(abs(s.pose.y) for s in mid) < 0.1


def test_fused_output_is_continuous():
    cfg = preset("cyclist-perturbed", seed=0)
    data = simulate_scenario(cfg)
    params = FusionParams()
    states = fuse_gnss_imu(data.gnss, data.imu, params)
    xy = np.array([[s.pose.x, s.pose.y] for s in states])
    ts = np.array([s.timestamp for s in states])
    step = np.linalg.norm(np.diff(xy, axis=0), axis=1)
    bound = params.v_max * np.diff(ts) + params.pos_gain * params.gate_max
    assert np.all(step <= bound)


def test_fused_yaw_never_nan():
    cfg = preset("cyclist-perturbed", seed=2)
    data = simulate_scenario(cfg)
    states = fuse_gnss_imu(data.gnss, data.imu)
    assert all(math.isfinite(s.pose.yaw) for s in states)


def test_trajectory_state_validation():
    with pytest.raises(ValueError):
        TrajectoryState(0.0, pose=None, speed=-1.0, yaw_rate=0.0)
