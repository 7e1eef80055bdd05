"""File interchange: versioned CSV and JSON-Lines formats.

Every file starts with a format-version line; readers reject unknown
versions.  CSV carries flat time series, JSON-Lines carries per-scan records
with variable-length point lists.  Timestamps are written with nanosecond
resolution so records can be joined on them exactly.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable

from .annotation import LabeledScan
from .core import (
    GLOBAL,
    Pose,
    RadarDetection,
    RadarScan,
    SensorMount,
    VruKind,
)
from .selection import OrientedEllipse
from .trajectory import GnssQuality, GnssSample, ImuSample, TrajectoryState

GNSS_TAG = "vruradar.gnss.v1"
IMU_TAG = "vruradar.imu.v1"
TRAJ_TAG = "vruradar.traj.v1"
RADAR_TAG = "vruradar.radar.v1"
TRUTH_LABELS_TAG = "vruradar.truth-labels.v1"
LABELED_TAG = "vruradar.labeled.v1"
SCENARIO_TAG = "vruradar.scenario.v1"


class SchemaError(ValueError):
    """Input file malformed; carries the offending line number when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        loc = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(f"{loc}{message}")
        self.path = path
        self.line = line


def _fmt_t(t: float) -> str:
    return f"{t:.9f}"


def _fmt(v: float) -> str:
    return repr(float(v))


def _check_header(line: str, tag: str, path) -> None:
    expected = f"# format={tag}"
    if line.rstrip("\n") != expected:
        raise SchemaError(f"expected header {expected!r}, got {line.strip()!r}", path, 1)


def _check_jsonl_header(record: dict, tag: str, path) -> None:
    if record.get("format") != tag:
        raise SchemaError(f"expected format tag {tag!r}, got {record.get('format')!r}", path, 1)


def _parse_float(text: str, name: str, path, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise SchemaError(f"field {name!r} is not a number: {text!r}", path, line) from None
    if not math.isfinite(v):
        raise SchemaError(f"field {name!r} is not finite: {text!r}", path, line)
    return v


# --- GNSS ---------------------------------------------------------------

def write_gnss_csv(path, samples: Iterable[GnssSample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# format={GNSS_TAG}\n")
        fh.write("timestamp,x,y,quality\n")
        for s in samples:
            fh.write(f"{_fmt_t(s.timestamp)},{_fmt(s.x)},{_fmt(s.y)},{s.quality.value}\n")


def read_gnss_csv(path) -> list[GnssSample]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError("empty file", path, 1)
    _check_header(lines[0], GNSS_TAG, path)
    if len(lines) < 2 or lines[1] != "timestamp,x,y,quality":
        raise SchemaError("bad column header", path, 2)
    for i, row in enumerate(lines[2:], start=3):
        if not row:
            continue
        parts = row.split(",")
        if len(parts) != 4:
            raise SchemaError(f"expected 4 fields, got {len(parts)}", path, i)
        try:
            quality = GnssQuality(parts[3])
        except ValueError:
            raise SchemaError(f"unknown quality {parts[3]!r}", path, i) from None
        out.append(
            GnssSample(
                timestamp=_parse_float(parts[0], "timestamp", path, i),
                x=_parse_float(parts[1], "x", path, i),
                y=_parse_float(parts[2], "y", path, i),
                quality=quality,
            )
        )
    return out


# --- IMU ----------------------------------------------------------------

def write_imu_csv(path, samples: Iterable[ImuSample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# format={IMU_TAG}\n")
        fh.write("timestamp,yaw_rate,accel_forward,yaw\n")
        for s in samples:
            yaw = "" if s.yaw is None else _fmt(s.yaw)
            fh.write(f"{_fmt_t(s.timestamp)},{_fmt(s.yaw_rate)},{_fmt(s.accel_forward)},{yaw}\n")


def read_imu_csv(path) -> list[ImuSample]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError("empty file", path, 1)
    _check_header(lines[0], IMU_TAG, path)
    if len(lines) < 2 or lines[1] != "timestamp,yaw_rate,accel_forward,yaw":
        raise SchemaError("bad column header", path, 2)
    for i, row in enumerate(lines[2:], start=3):
        if not row:
            continue
        parts = row.split(",")
        if len(parts) != 4:
            raise SchemaError(f"expected 4 fields, got {len(parts)}", path, i)
        out.append(
            ImuSample(
                timestamp=_parse_float(parts[0], "timestamp", path, i),
                yaw_rate=_parse_float(parts[1], "yaw_rate", path, i),
                accel_forward=_parse_float(parts[2], "accel_forward", path, i),
                yaw=None if parts[3] == "" else _parse_float(parts[3], "yaw", path, i),
            )
        )
    return out


# --- Trajectory states ---------------------------------------------------

def write_traj_csv(path, states: Iterable[TrajectoryState]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# format={TRAJ_TAG}\n")
        fh.write("timestamp,x,y,yaw,speed,yaw_rate\n")
        for s in states:
            fh.write(
                f"{_fmt_t(s.timestamp)},{_fmt(s.pose.x)},{_fmt(s.pose.y)},"
                f"{_fmt(s.pose.yaw)},{_fmt(s.speed)},{_fmt(s.yaw_rate)}\n"
            )


def read_traj_csv(path) -> list[TrajectoryState]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError("empty file", path, 1)
    _check_header(lines[0], TRAJ_TAG, path)
    if len(lines) < 2 or lines[1] != "timestamp,x,y,yaw,speed,yaw_rate":
        raise SchemaError("bad column header", path, 2)
    for i, row in enumerate(lines[2:], start=3):
        if not row:
            continue
        parts = row.split(",")
        if len(parts) != 6:
            raise SchemaError(f"expected 6 fields, got {len(parts)}", path, i)
        vals = [_parse_float(p, name, path, i) for p, name in zip(parts, lines[1].split(","))]
        out.append(
            TrajectoryState(
                timestamp=vals[0],
                pose=Pose(vals[1], vals[2], vals[3], frame=GLOBAL),
                speed=vals[4],
                yaw_rate=vals[5],
            )
        )
    return out


# --- Radar scans ----------------------------------------------------------

def write_radar_jsonl(path, scans: Iterable[RadarScan]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": RADAR_TAG}) + "\n")
        for scan in scans:
            rec = {
                "t": round(scan.timestamp, 9),
                "sensor_id": scan.sensor_id,
                "points": [
                    {
                        "range": d.range_m,
                        "azimuth": d.azimuth,
                        "vr": d.radial_velocity,
                        "amp": d.amplitude,
                    }
                    for d in scan.detections
                ],
            }
            fh.write(json.dumps(rec) + "\n")


def _load_jsonl(path, tag: str) -> list[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError("empty file", path, 1)
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError:
        raise SchemaError("header line is not JSON", path, 1) from None
    _check_jsonl_header(head, tag, path)
    out = []
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        try:
            out.append((i, json.loads(line)))
        except json.JSONDecodeError:
            raise SchemaError("record is not valid JSON", path, i) from None
    return out


def read_radar_jsonl(path) -> list[RadarScan]:
    scans = []
    for i, rec in _load_jsonl(path, RADAR_TAG):
        try:
            t = float(rec["t"])
            sensor_id = str(rec["sensor_id"])
            dets = tuple(
                RadarDetection(
                    timestamp=t,
                    range_m=float(p["range"]),
                    azimuth=float(p["azimuth"]),
                    radial_velocity=float(p["vr"]),
                    amplitude=float(p["amp"]),
                    sensor_id=sensor_id,
                    index=k,
                )
                for k, p in enumerate(rec["points"])
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad radar record: {exc}", path, i) from None
        scans.append(RadarScan(timestamp=t, sensor_id=sensor_id, detections=dets))
    return scans


# --- Truth labels -----------------------------------------------------------

def write_truth_labels_jsonl(path, labels: Iterable[tuple[float, int, str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": TRUTH_LABELS_TAG}) + "\n")
        for t, idx, label in labels:
            fh.write(json.dumps({"t": round(t, 9), "idx": idx, "label": label}) + "\n")


def read_truth_labels_jsonl(path) -> dict[tuple[float, int], str]:
    out: dict[tuple[float, int], str] = {}
    for i, rec in _load_jsonl(path, TRUTH_LABELS_TAG):
        try:
            out[(round(float(rec["t"]), 9), int(rec["idx"]))] = str(rec["label"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad label record: {exc}", path, i) from None
    return out


# --- Labeled scans -----------------------------------------------------------

def _det_to_dict(d: RadarDetection) -> dict:
    return {
        "idx": d.index,
        "range": d.range_m,
        "azimuth": d.azimuth,
        "vr": d.radial_velocity,
        "amp": d.amplitude,
        "ego": list(d.cartesian_ego) if d.cartesian_ego is not None else None,
        "global": list(d.cartesian_global) if d.cartesian_global is not None else None,
    }


def _det_from_dict(p: dict, t: float, sensor_id: str) -> RadarDetection:
    return RadarDetection(
        timestamp=t,
        range_m=float(p["range"]),
        azimuth=float(p["azimuth"]),
        radial_velocity=float(p["vr"]),
        amplitude=float(p["amp"]),
        sensor_id=sensor_id,
        index=int(p["idx"]),
        cartesian_ego=tuple(p["ego"]) if p.get("ego") is not None else None,
        cartesian_global=tuple(p["global"]) if p.get("global") is not None else None,
    )


def write_labeled_jsonl(path, scans: Iterable[LabeledScan]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": LABELED_TAG}) + "\n")
        for s in scans:
            bounding = None
            if s.bounding is not None:
                bounding = {
                    "cx": s.bounding.center[0],
                    "cy": s.bounding.center[1],
                    "ax_major": s.bounding.ax_major,
                    "ax_minor": s.bounding.ax_minor,
                    "orientation": s.bounding.orientation,
                }
            rec = {
                "t": round(s.timestamp, 9),
                "track_id": s.track_id,
                "vru_kind": s.vru_kind.value,
                "sensor_id": s.sensor_id,
                "assigned": [_det_to_dict(d) for d in s.assigned],
                "rejected": [_det_to_dict(d) for d in s.rejected],
                "bounding": bounding,
                "vru_state": {
                    "x": s.vru_state.pose.x,
                    "y": s.vru_state.pose.y,
                    "yaw": s.vru_state.pose.yaw,
                    "speed": s.vru_state.speed,
                    "yaw_rate": s.vru_state.yaw_rate,
                },
            }
            fh.write(json.dumps(rec) + "\n")


def read_labeled_jsonl(path) -> list[LabeledScan]:
    scans = []
    for i, rec in _load_jsonl(path, LABELED_TAG):
        try:
            t = float(rec["t"])
            sensor_id = str(rec["sensor_id"])
            state = TrajectoryState(
                timestamp=t,
                pose=Pose(
                    float(rec["vru_state"]["x"]),
                    float(rec["vru_state"]["y"]),
                    float(rec["vru_state"]["yaw"]),
                    frame=GLOBAL,
                ),
                speed=float(rec["vru_state"]["speed"]),
                yaw_rate=float(rec["vru_state"]["yaw_rate"]),
            )
            bounding = None
            if rec.get("bounding") is not None:
                b = rec["bounding"]
                bounding = OrientedEllipse(
                    center=(float(b["cx"]), float(b["cy"])),
                    ax_major=float(b["ax_major"]),
                    ax_minor=float(b["ax_minor"]),
                    orientation=float(b["orientation"]),
                )
            scans.append(
                LabeledScan(
                    timestamp=t,
                    track_id=str(rec["track_id"]),
                    vru_kind=VruKind(rec["vru_kind"]),
                    sensor_id=sensor_id,
                    assigned=tuple(_det_from_dict(p, t, sensor_id) for p in rec["assigned"]),
                    rejected=tuple(_det_from_dict(p, t, sensor_id) for p in rec["rejected"]),
                    bounding=bounding,
                    vru_state=state,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad labeled record: {exc}", path, i) from None
    return scans


# --- Scenario manifest --------------------------------------------------------

def write_scenario_json(
    path,
    *,
    vru_kind: VruKind,
    track_id: str,
    seed: int,
    ego_pose: Pose,
    mounts: Iterable[SensorMount],
    counts: dict[str, int],
) -> None:
    rec = {
        "format": SCENARIO_TAG,
        "vru_kind": vru_kind.value,
        "track_id": track_id,
        "seed": seed,
        "ego_pose": {"x": ego_pose.x, "y": ego_pose.y, "yaw": ego_pose.yaw},
        "mounts": [
            {
                "sensor_id": m.sensor_id,
                "x": m.pose_in_ego.x,
                "y": m.pose_in_ego.y,
                "yaw": m.pose_in_ego.yaw,
                "fov_azimuth": m.fov_azimuth,
                "max_range": m.max_range,
            }
            for m in mounts
        ],
        "counts": counts,
    }
    Path(path).write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_scenario_json(path) -> dict:
    try:
        rec = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        raise SchemaError("scenario manifest is not valid JSON", path, 1) from None
    _check_jsonl_header(rec, SCENARIO_TAG, path)
    try:
        rec["vru_kind"] = VruKind(rec["vru_kind"])
        ep = rec["ego_pose"]
        rec["ego_pose"] = Pose(float(ep["x"]), float(ep["y"]), float(ep["yaw"]), frame=GLOBAL)
        rec["mounts"] = [
            SensorMount(
                sensor_id=str(m["sensor_id"]),
                pose_in_ego=Pose(float(m["x"]), float(m["y"]), float(m["yaw"]), frame="ego"),
                fov_azimuth=float(m["fov_azimuth"]),
                max_range=float(m["max_range"]),
            )
            for m in rec["mounts"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad scenario manifest: {exc}", path, 1) from None
    return rec
