"""Reference trajectories from GNSS and IMU streams.

Raw streams are smoothed with a centered moving average, positions are
interpolated with a natural cubic spline, and an optional loosely-coupled
GNSS+IMU filter provides robustness against GNSS perturbations: it dead
reckons on gyro and accelerometer data and only accepts GNSS fixes whose
innovation passes a gate.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.interpolate import CubicSpline

from .core import GLOBAL, Pose, wrap_angle

STANDSTILL_SPEED = 0.05  # m/s, shared branch threshold for standstill handling


class GnssQuality(str, Enum):
    FIX_RTK = "FIX_RTK"
    FIX_FLOAT = "FIX_FLOAT"
    DEGRADED = "DEGRADED"


@dataclass(frozen=True)
class GnssSample:
    timestamp: float
    x: float
    y: float
    quality: GnssQuality = GnssQuality.FIX_RTK


@dataclass(frozen=True)
class ImuSample:
    timestamp: float
    yaw_rate: float
    accel_forward: float
    yaw: float | None = None  # device-integrated heading, optional


@dataclass(frozen=True)
class TrajectoryState:
    """Pose, speed, and yaw rate of a reference track at one instant."""

    timestamp: float
    pose: Pose
    speed: float
    yaw_rate: float

    def __post_init__(self) -> None:
        if self.speed < 0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")


class OutOfRangeError(ValueError):
    """Query time outside the trajectory support; no extrapolation is done."""


def _clip(value: float, bound: float) -> float:
    return max(-bound, min(bound, value))


def moving_average(values, window: int = 9) -> np.ndarray:
    """Centered moving average with the window clipped at the stream boundaries.

    `values` is (n,) or (n, d); the output has the same shape.  At index i the
    mean is taken over [i - window//2, i + window//2] intersected with the
    valid range, so boundary samples average over fewer points and the output
    length equals the input length.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    arr = np.asarray(values, dtype=float)
    n = arr.shape[0]
    if n == 0:
        return arr.copy()
    half = window // 2
    flat = arr.reshape(n, -1)
    csum = np.vstack([np.zeros((1, flat.shape[1])), np.cumsum(flat, axis=0)])
    idx = np.arange(n)
    lo = np.maximum(0, idx - half)
    hi = np.minimum(n, idx + half + 1)
    out = (csum[hi] - csum[lo]) / (hi - lo)[:, None]
    return out.reshape(arr.shape)


def smooth_gnss(samples: list[GnssSample], window: int = 9) -> list[GnssSample]:
    """GNSS stream with positions smoothed; timestamps and quality unchanged."""
    if not samples:
        return []
    xy = moving_average([[s.x, s.y] for s in samples], window)
    return [replace(s, x=float(p[0]), y=float(p[1])) for s, p in zip(samples, xy)]


def smooth_imu(samples: list[ImuSample], window: int = 9) -> list[ImuSample]:
    """IMU stream with yaw rate and acceleration smoothed.

    The integrated-yaw channel is smoothed on the unwrapped angle when every
    sample carries one, otherwise passed through untouched.
    """
    if not samples:
        return []
    rates = moving_average([s.yaw_rate for s in samples], window)
    accels = moving_average([s.accel_forward for s in samples], window)
    yaws: list[float | None]
    if all(s.yaw is not None for s in samples):
        unwrapped = np.unwrap([s.yaw for s in samples])
        yaws = [wrap_angle(v) for v in moving_average(unwrapped, window)]
    else:
        yaws = [s.yaw for s in samples]
    return [
        replace(s, yaw_rate=float(w), accel_forward=float(a), yaw=y)
        for s, w, a, y in zip(samples, rates, accels, yaws)
    ]


class ReferenceTrajectory:
    """Time-continuous track built from smoothed positions.

    Positions come from a natural cubic spline through the knots; speed is the
    spline tangent magnitude; yaw follows the tangent while moving and holds
    the last moving value at standstill; yaw rate comes from a smoothed IMU
    stream when one is supplied and from spline curvature otherwise.
    """

    def __init__(
        self,
        times,
        positions,
        *,
        imu: list[ImuSample] | None = None,
        standstill_speed: float = STANDSTILL_SPEED,
    ):
        t = np.asarray(times, dtype=float)
        xy = np.asarray(positions, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("need at least two samples to build a trajectory")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if xy.shape != (len(t), 2):
            raise ValueError(f"positions must be (n, 2), got {xy.shape}")
        self._times = t
        self._spline = CubicSpline(t, xy, axis=0, bc_type="natural")
        self._deriv1 = self._spline.derivative(1)
        self._deriv2 = self._spline.derivative(2)
        self._standstill_speed = float(standstill_speed)
        if imu is not None and len(imu) > 0:
            self._imu_t = np.array([s.timestamp for s in imu])
            self._imu_w = np.array([s.yaw_rate for s in imu])
        else:
            self._imu_t = None
            self._imu_w = None
        # Per-knot table of the most recent moving-direction yaw, for the hold
        # rule.  Knot-to-knot chords are used instead of spline tangents: the
        # natural spline rings at an abrupt stop and can point backwards there.
        diffs = np.diff(xy, axis=0)
        dts = np.diff(t)
        chord_speed = np.hypot(diffs[:, 0], diffs[:, 1]) / dts
        moving = chord_speed >= self._standstill_speed
        held = np.zeros(len(t))
        if moving.any():
            k0 = int(np.argmax(moving))
            last = float(math.atan2(diffs[k0, 1], diffs[k0, 0]))
            for i in range(len(t)):
                if i >= 1 and moving[i - 1]:
                    last = float(math.atan2(diffs[i - 1, 1], diffs[i - 1, 0]))
                held[i] = last
        self._held_yaw = held

    @property
    def t_start(self) -> float:
        return float(self._times[0])

    @property
    def t_end(self) -> float:
        return float(self._times[-1])

    def covers(self, t: float) -> bool:
        return self.t_start <= t <= self.t_end

    def position_at(self, t: float) -> np.ndarray:
        if not self.covers(t):
            raise OutOfRangeError(
                f"t={t} outside trajectory support [{self.t_start}, {self.t_end}]"
            )
        return self._spline(t)

    def state_at(self, t: float) -> TrajectoryState:
        pos = self.position_at(t)
        vx, vy = self._deriv1(t)
        speed = float(math.hypot(vx, vy))
        if speed >= self._standstill_speed:
            yaw = math.atan2(vy, vx)
        else:
            knot = int(np.searchsorted(self._times, t, side="right") - 1)
            yaw = float(self._held_yaw[max(0, min(knot, len(self._times) - 1))])
        if self._imu_t is not None:
            yaw_rate = float(np.interp(t, self._imu_t, self._imu_w))
        else:
            ax, ay = self._deriv2(t)
            yaw_rate = float((vx * ay - vy * ax) / (speed * speed)) if speed > 1e-9 else 0.0
        return TrajectoryState(
            timestamp=float(t),
            pose=Pose(float(pos[0]), float(pos[1]), float(yaw), frame=GLOBAL),
            speed=speed,
            yaw_rate=yaw_rate,
        )


def interpolate_pose(traj: ReferenceTrajectory, t: float) -> TrajectoryState:
    """Trajectory state at an arbitrary query time within the support."""
    return traj.state_at(t)


def build_trajectory(
    gnss: list[GnssSample],
    *,
    imu: list[ImuSample] | None = None,
    window: int = 9,
    standstill_speed: float = STANDSTILL_SPEED,
) -> ReferenceTrajectory:
    """Smooth a GNSS stream and wrap it as a queryable reference trajectory."""
    if len(gnss) < 2:
        raise ValueError("need at least two GNSS samples")
    smoothed = smooth_gnss(gnss, window)
    times = [s.timestamp for s in smoothed]
    xy = [[s.x, s.y] for s in smoothed]
    imu_s = smooth_imu(imu, window) if imu else None
    return ReferenceTrajectory(times, xy, imu=imu_s, standstill_speed=standstill_speed)


@dataclass(frozen=True)
class FusionParams:
    """Gains and gates of the loosely-coupled GNSS+IMU filter."""

    gate: float = 0.5  # m, innovation gate separating perturbations from RTK noise
    gate_growth: float = 0.15  # m/s of coasting added to the gate, models drift uncertainty
    gate_max: float = 1.5  # m, keeps far-off fixes rejected no matter how long the coast
    max_fix_gap: float = 0.3  # s, course/speed window resets across acceptance gaps
    pos_gain: float = 0.3
    speed_gain: float = 0.2
    course_gain: float = 0.12
    course_window: int = 9  # accepted fixes used for the GNSS course/speed estimate
    course_min_dist: float = 0.15  # m, displacement needed before course is trusted
    course_min_span: float = 0.25  # s, baseline needed before course/speed are trusted
    max_course_step: float = 0.05  # rad, per-fix yaw correction limit
    max_speed_step: float = 0.25  # m/s, per-fix speed correction limit
    gyro_bias_gain: float = 0.01
    accel_bias_gain: float = 0.01
    bias_adapt_max_verr: float = 0.3  # m/s, bias learning pauses above these errors
    bias_adapt_max_cerr: float = 0.1  # rad
    v_min: float = STANDSTILL_SPEED  # m/s, standstill speed threshold
    omega_min: float = 0.05  # rad/s, standstill yaw-rate threshold
    v_max: float = 12.0
    max_reject_time: float = 12.0  # s of consecutive gating before a hard reset


def fuse_gnss_imu(
    gnss: list[GnssSample],
    imu: list[ImuSample],
    params: FusionParams = FusionParams(),
) -> list[TrajectoryState]:
    """Dead-reckon on IMU data and apply gated GNSS position corrections.

    Output states are emitted at the IMU timestamps that fall inside the
    overlap of both streams.  While GNSS is gated out (perturbation) or
    flagged DEGRADED the filter coasts on the IMU alone; below the standstill
    thresholds the position freezes and speed resets to zero.
    """
    if not gnss or not imu:
        raise ValueError("both GNSS and IMU streams must be non-empty")
    t0 = max(gnss[0].timestamp, imu[0].timestamp)
    t1 = min(gnss[-1].timestamp, imu[-1].timestamp)
    if t0 >= t1:
        raise ValueError("GNSS and IMU streams do not overlap in time")

    # Snap to the first usable fix; the filter engages once the fix window
    # establishes course and speed (or confirms a standstill start).
    g_idx = 0
    while gnss[g_idx].timestamp < t0:
        g_idx += 1
    x, y = gnss[g_idx].x, gnss[g_idx].y
    yaw = 0.0
    speed = 0.0
    gyro_bias = 0.0
    accel_bias = 0.0
    initializing = True
    recent: deque[GnssSample] = deque(maxlen=params.course_window)
    last_accept_t = gnss[g_idx].timestamp

    out: list[TrajectoryState] = []
    prev_t: float | None = None
    for sample in imu:
        t = sample.timestamp
        if t < t0 or t > t1:
            continue
        dt = 0.0 if prev_t is None else t - prev_t
        prev_t = t
        w = sample.yaw_rate - gyro_bias
        a = sample.accel_forward - accel_bias
        standstill = speed < params.v_min and abs(w) < params.omega_min
        if dt > 0.0 and not initializing:
            if standstill:
                speed = 0.0
            else:
                yaw = wrap_angle(yaw + w * dt)
                x += speed * math.cos(yaw) * dt
                y += speed * math.sin(yaw) * dt
                speed = min(max(speed + a * dt, 0.0), params.v_max)

        while g_idx < len(gnss) and gnss[g_idx].timestamp <= t:
            fix = gnss[g_idx]
            g_idx += 1
            if fix.quality == GnssQuality.DEGRADED:
                continue
            if not initializing:
                innovation = math.hypot(fix.x - x, fix.y - y)
                gate = min(
                    params.gate_max,
                    params.gate + params.gate_growth * max(0.0, fix.timestamp - last_accept_t),
                )
                if innovation >= gate:
                    if fix.timestamp - last_accept_t > params.max_reject_time:
                        # Persistent disagreement: reinitialize on the fix.
                        x, y = fix.x, fix.y
                        recent.clear()
                        last_accept_t = fix.timestamp
                    continue
            last_accept_t = fix.timestamp
            if recent and fix.timestamp - recent[-1].timestamp > params.max_fix_gap:
                recent.clear()
            recent.append(fix)
            oldest = recent[0]
            dx, dy = fix.x - oldest.x, fix.y - oldest.y
            dist = math.hypot(dx, dy)
            span = fix.timestamp - oldest.timestamp

            if initializing:
                x, y = fix.x, fix.y
                if span >= params.course_min_span and dist >= params.course_min_dist:
                    # Moving start: seed course and speed from the fix window.
                    half_turn = 0.5 * w * span
                    yaw = wrap_angle(math.atan2(dy, dx) + half_turn)
                    speed = min(dist / span, params.v_max)
                    initializing = False
                elif span >= 4.0 * params.course_min_span and dist < params.course_min_dist:
                    # Standstill start: engage frozen at the fix position.
                    yaw = 0.0
                    speed = 0.0
                    initializing = False
                continue

            if not standstill:
                x += params.pos_gain * (fix.x - x)
                y += params.pos_gain * (fix.y - y)
            if span >= params.course_min_span:
                # The fix-window secant measures speed and course at the
                # window midpoint; while turning, rotate it forward by half
                # a window and stretch chord to arc before comparing.
                half_turn = 0.5 * w * span
                chord_factor = half_turn / math.sin(half_turn) if abs(half_turn) > 1e-6 else 1.0
                v_gnss = dist / span * chord_factor
                err_v = v_gnss - speed
                step_v = _clip(params.speed_gain * err_v, params.max_speed_step)
                speed = min(max(speed + step_v, 0.0), params.v_max)
                if abs(err_v) < params.bias_adapt_max_verr:
                    accel_bias -= params.accel_bias_gain * err_v
                if dist >= params.course_min_dist:
                    course = math.atan2(dy, dx) + half_turn
                    err_c = wrap_angle(course - yaw)
                    yaw = wrap_angle(yaw + _clip(params.course_gain * err_c, params.max_course_step))
                    if abs(err_c) < params.bias_adapt_max_cerr:
                        gyro_bias -= params.gyro_bias_gain * err_c

        out.append(
            TrajectoryState(
                timestamp=t,
                pose=Pose(x, y, yaw, frame=GLOBAL),
                speed=speed,
                yaw_rate=w,
            )
        )
    return out


def build_fused_trajectory(
    gnss: list[GnssSample],
    imu: list[ImuSample],
    params: FusionParams = FusionParams(),
    *,
    window: int = 9,
    standstill_speed: float = STANDSTILL_SPEED,
) -> ReferenceTrajectory:
    """Fusion filter output smoothed and wrapped as a reference trajectory."""
    states = fuse_gnss_imu(gnss, imu, params)
    if len(states) < 2:
        raise ValueError("fusion produced fewer than two states")
    times = [s.timestamp for s in states]
    xy = moving_average([[s.pose.x, s.pose.y] for s in states], window)
    imu_s = smooth_imu(imu, window)
    return ReferenceTrajectory(times, xy, imu=imu_s, standstill_speed=standstill_speed)
