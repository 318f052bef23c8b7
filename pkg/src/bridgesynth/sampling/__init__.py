"""Point-cloud generation from bridge meshes: surface sampling and simulated LiDAR."""
from .lidar import LidarConfig, Scene, merge_scans, ray_directions, simulate_lidar_scan, simulate_lidar_scans
from .sensors import (SensorPose, clear_sensor_poses, place_sensors_pslp, place_sensors_rslp,
                      pslp_grid_shape)
from .surface import sample_mesh_surface

__all__ = [
    "LidarConfig", "Scene", "SensorPose", "clear_sensor_poses", "merge_scans",
    "place_sensors_pslp", "place_sensors_rslp", "pslp_grid_shape", "ray_directions",
    "sample_mesh_surface", "simulate_lidar_scan", "simulate_lidar_scans",
]
