"""Radar-to-trajectory annotation for vulnerable road users.

Associates radar detections with GNSS+IMU-referenced tracks, accumulates
object-centered signature grids, evaluates assignment quality, and runs a
random-matrix extended-object tracker, all against a seeded scenario
simulator.
"""

__version__ = "0.1.0"
