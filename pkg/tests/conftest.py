import time
from dataclasses import dataclass

import numpy as np
import pytest

from vruradar.annotation import AnnotationResult, annotate_scenario
from vruradar.core import LABEL_VRU, compose_pose, ego_to_global, polar_to_ego
from vruradar.eot import TrackerScan
from vruradar.simulator import ScenarioData, preset, simulate_scenario
from vruradar.trajectory import FusionParams, build_fused_trajectory, build_trajectory


@dataclass
class PresetRun:
    data: ScenarioData
    fused: AnnotationResult
    gnss_only: AnnotationResult | None
    truth: dict
    elapsed: float


def run_preset(name: str, seed: int, *, both_modes: bool = False) -> PresetRun:
    t0 = time.perf_counter()
    cfg = preset(name, seed=seed)
    data = simulate_scenario(cfg)
    traj_f = build_fused_trajectory(data.gnss, data.imu, FusionParams())
    fused = annotate_scenario(data.scans, traj_f, cfg.vru_kind, cfg.mounts, cfg.ego_pose)
    gnss_only = None
    if both_modes:
        traj_g = build_trajectory(data.gnss)
        gnss_only = annotate_scenario(data.scans, traj_g, cfg.vru_kind, cfg.mounts, cfg.ego_pose)
    return PresetRun(
        data=data, fused=fused, gnss_only=gnss_only,
        truth=data.label_map(), elapsed=time.perf_counter() - t0,
    )


def truth_assigned_scans(data: ScenarioData) -> list[TrackerScan]:
    """Tracker inputs using the simulator's own labels (perfect association)."""
    cfg = data.config
    mounts = {m.sensor_id: m for m in cfg.mounts}
    labels = data.label_map()
    out = []
    for scan in data.scans:
        mount = mounts[scan.sensor_id]
        sensor = compose_pose(cfg.ego_pose, mount.pose_in_ego)
        keep = [
            d for d in scan.detections
            if labels[(round(scan.timestamp, 9), d.index)] == LABEL_VRU
        ]
        if keep:
            pts = np.array([ego_to_global(polar_to_ego(d, mount), cfg.ego_pose) for d in keep])
            out.append(
                TrackerScan(
                    timestamp=scan.timestamp,
                    points=pts,
                    radial_velocities=np.array([d.radial_velocity for d in keep]),
                    sensor_pos=sensor.xy,
                )
            )
    return out


@pytest.fixture(scope="session")
def pedestrian_run():
    return run_preset("pedestrian-nominal", seed=101)


@pytest.fixture(scope="session")
def cyclist_run():
    return run_preset("cyclist-nominal", seed=202)


@pytest.fixture(scope="session")
def perturbed_runs():
    return [run_preset("cyclist-perturbed", seed=s, both_modes=True) for s in range(5)]
