import math

import pytest

from vruradar import io
from vruradar.annotation import annotate_scenario
from vruradar.simulator import preset, simulate_scenario
from vruradar.trajectory import (
    GnssQuality,
    GnssSample,
    ImuSample,
    build_trajectory,
)


@pytest.fixture(scope="module")
def small_scenario():
    cfg = preset("cyclist-nominal", seed=13)
    from dataclasses import replace

    return simulate_scenario(replace(cfg, duration=12.0))


def test_gnss_round_trip(tmp_path, small_scenario):
    path = tmp_path / "gnss.csv"
    io.write_gnss_csv(path, small_scenario.gnss)
    back = io.read_gnss_csv(path)
    assert len(back) == len(small_scenario.gnss)
    for a, b in zip(back, small_scenario.gnss):
        assert a.timestamp == pytest.approx(b.timestamp, abs=1e-9)
        assert (a.x, a.y) == (b.x, b.y)
        assert a.quality == b.quality


def test_imu_round_trip_with_optional_yaw(tmp_path):
    samples = [
        ImuSample(timestamp=0.0, yaw_rate=0.1, accel_forward=-0.2, yaw=1.5),
        ImuSample(timestamp=0.5, yaw_rate=-0.3, accel_forward=0.0, yaw=None),
    ]
    path = tmp_path / "imu.csv"
    io.write_imu_csv(path, samples)
    back = io.read_imu_csv(path)
    assert back[0].yaw == 1.5
    assert back[1].yaw is None
    assert back[1].yaw_rate == -0.3


def test_radar_round_trip(tmp_path, small_scenario):
    path = tmp_path / "radar.jsonl"
    io.write_radar_jsonl(path, small_scenario.scans)
    back = io.read_radar_jsonl(path)
    assert len(back) == len(small_scenario.scans)
    for a, b in zip(back, small_scenario.scans):
        assert a.sensor_id == b.sensor_id
        assert len(a.detections) == len(b.detections)
        for da, db in zip(a.detections, b.detections):
            assert da.range_m == db.range_m
            assert da.azimuth == db.azimuth
            assert da.radial_velocity == db.radial_velocity
            assert da.index == db.index


def test_truth_labels_round_trip(tmp_path, small_scenario):
    path = tmp_path / "labels.jsonl"
    io.write_truth_labels_jsonl(path, small_scenario.labels)
    back = io.read_truth_labels_jsonl(path)
    assert back == small_scenario.label_map()


def test_traj_round_trip(tmp_path, small_scenario):
    path = tmp_path / "traj.csv"
    io.write_traj_csv(path, small_scenario.truth)
    back = io.read_traj_csv(path)
    assert len(back) == len(small_scenario.truth)
    for a, b in zip(back[::50], small_scenario.truth[::50]):
        assert a.pose.x == b.pose.x
        assert a.speed == b.speed
        assert a.yaw_rate == b.yaw_rate


def test_labeled_round_trip_preserves_partition(tmp_path, small_scenario):
    cfg = small_scenario.config
    traj = build_trajectory(small_scenario.gnss)
    result = annotate_scenario(
        small_scenario.scans, traj, cfg.vru_kind, cfg.mounts, cfg.ego_pose
    )
    path = tmp_path / "labeled.jsonl"
    io.write_labeled_jsonl(path, result.scans)
    back = io.read_labeled_jsonl(path)
    assert len(back) == len(result.scans)
    for a, b in zip(back, result.scans):
        assert a.timestamp == pytest.approx(b.timestamp, abs=1e-9)
        assert a.vru_kind == b.vru_kind
        assert len(a.assigned) == len(b.assigned)
        assert len(a.rejected) == len(b.rejected)
        assert (a.bounding is None) == (b.bounding is None)
        if a.bounding is not None:
            assert a.bounding.ax_major == b.bounding.ax_major
        assert a.vru_state.pose.x == b.vru_state.pose.x
        for da, db in zip(a.assigned, b.assigned):
            assert da.cartesian_global == db.cartesian_global


def test_scenario_manifest_round_trip(tmp_path, small_scenario):
    cfg = small_scenario.config
    path = tmp_path / "scenario.json"
    io.write_scenario_json(
        path, vru_kind=cfg.vru_kind, track_id="vru-0", seed=cfg.rng_seed,
        ego_pose=cfg.ego_pose, mounts=cfg.mounts, counts={"radar_scans": 3},
    )
    meta = io.read_scenario_json(path)
    assert meta["vru_kind"] == cfg.vru_kind
    assert meta["seed"] == cfg.rng_seed
    assert meta["ego_pose"].x == cfg.ego_pose.x
    assert [m.sensor_id for m in meta["mounts"]] == [m.sensor_id for m in cfg.mounts]
    assert meta["mounts"][0].fov_azimuth == pytest.approx(math.radians(60))


@pytest.mark.parametrize("reader,header", [
    (io.read_gnss_csv, "# format=vruradar.gnss.v1"),
    (io.read_imu_csv, "# format=vruradar.imu.v1"),
    (io.read_traj_csv, "# format=vruradar.traj.v1"),
])
def test_csv_readers_reject_wrong_version(tmp_path, reader, header):
    path = tmp_path / "bad.csv"
    path.write_text(header.replace("v1", "v9") + "\ntimestamp,x,y,quality\n", encoding="utf-8")
    with pytest.raises(io.SchemaError):
        reader(path)


@pytest.mark.parametrize("reader", [io.read_radar_jsonl, io.read_truth_labels_jsonl,
                                    io.read_labeled_jsonl])
def test_jsonl_readers_reject_wrong_version(tmp_path, reader):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"format": "vruradar.other.v1"}\n', encoding="utf-8")
    with pytest.raises(io.SchemaError):
        reader(path)


def test_csv_reader_reports_line_numbers(tmp_path):
    path = tmp_path / "gnss.csv"
    path.write_text(
        "# format=vruradar.gnss.v1\ntimestamp,x,y,quality\n"
        "0.000000000,1.0,2.0,FIX_RTK\n0.1,oops,2.0,FIX_RTK\n",
        encoding="utf-8",
    )
    with pytest.raises(io.SchemaError) as err:
        io.read_gnss_csv(path)
    assert err.value.line == 4
    assert "x" in str(err.value)


def test_jsonl_reader_reports_line_numbers(tmp_path):
    path = tmp_path / "radar.jsonl"
    path.write_text(
        '{"format": "vruradar.radar.v1"}\n{"t": 0.0, "sensor_id": "r", "points": []}\nnot json\n',
        encoding="utf-8",
    )
    with pytest.raises(io.SchemaError) as err:
        io.read_radar_jsonl(path)
    assert err.value.line == 3


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(io.SchemaError):
        io.read_gnss_csv(path)


def test_gnss_quality_values_validated(tmp_path):
    path = tmp_path / "gnss.csv"
    path.write_text(
        "# format=vruradar.gnss.v1\ntimestamp,x,y,quality\n0.0,1.0,2.0,GREAT\n",
        encoding="utf-8",
    )
    with pytest.raises(io.SchemaError):
        io.read_gnss_csv(path)


def test_degraded_quality_round_trips(tmp_path):
    samples = [GnssSample(timestamp=0.0, x=0.0, y=0.0, quality=GnssQuality.DEGRADED)]
    path = tmp_path / "gnss.csv"
    io.write_gnss_csv(path, samples)
    assert io.read_gnss_csv(path)[0].quality == GnssQuality.DEGRADED
