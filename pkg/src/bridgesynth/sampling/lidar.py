from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..cloud import LabeledPointCloud
from .raycast import TriangleBVH, point_triangle_distance

MIN_SENSOR_CLEARANCE = 0.01


@dataclass(frozen=True)
class LidarConfig:
    min_range: float = 0.0
    max_range: float = 600.0
    horizontal_fov: float = 360.0
    vertical_fov: float = 180.0
    horizontal_resolution: float = 0.4
    vertical_resolution: float = 0.4

    def __post_init__(self):
        if not 0 <= self.min_range < self.max_range:
            raise ValueError("need 0 <= min_range < max_range")
        if not (self.horizontal_fov > 0 and self.vertical_fov > 0):
            raise ValueError("fields of view must be positive")
        if not (self.horizontal_resolution > 0 and self.vertical_resolution > 0):
            raise ValueError("angular resolutions must be positive")
        if self.horizontal_fov > 360 or self.vertical_fov > 180:
            raise ValueError("fov exceeds the full sphere")

    @classmethod
    def with_resolution(cls, degrees, **kwargs):
        return cls(horizontal_resolution=degrees, vertical_resolution=degrees, **kwargs)

    @property
    def azimuth_count(self):
        n = int(np.floor(self.horizontal_fov / self.horizontal_resolution + 1e-9))
        return n if self.horizontal_fov >= 360 else n + 1

    @property
    def elevation_count(self):
        return int(np.floor(self.vertical_fov / self.vertical_resolution + 1e-9)) + 1


def ray_directions(config):
    """Unit directions in the sensor frame, ordered elevation-major then azimuth."""
    az = np.deg2rad(-config.horizontal_fov / 2
                    + config.horizontal_resolution * np.arange(config.azimuth_count))
    el = np.deg2rad(-config.vertical_fov / 2
                    + config.vertical_resolution * np.arange(config.elevation_count))
    el, az = np.meshgrid(el, az, indexing="ij")
    d = np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1)
    return d.reshape(-1, 3)


class Scene:
    """Triangle soup of a set of component meshes with per-triangle labels."""

    def __init__(self, meshes):
        meshes = list(meshes)
        if not meshes:
            raise ValueError("scene needs at least one mesh")
        self.meshes = meshes
        self.triangles = np.concatenate([m.corners for m in meshes])
        self.semantic = np.concatenate(
            [np.full(len(m.triangles), m.semantic_class, dtype=np.int64) for m in meshes])
        self.instance = np.concatenate(
            [np.full(len(m.triangles), m.instance_id, dtype=np.int64) for m in meshes])
        self.bvh = TriangleBVH(self.triangles)

    def clearance(self, point):
        return float(point_triangle_distance(point, self.triangles).min())


def _as_scene(meshes):
    return meshes if isinstance(meshes, Scene) else Scene(meshes)


def simulate_lidar_scan(meshes, pose, config=None):
    """Cast one sensor's ray grid and keep the first hit of every ray.

    ``meshes`` may be a list of :class:`ComponentMesh` or a prebuilt
    :class:`Scene` (preferred when scanning from many poses).
    """
    config = config or LidarConfig()
    scene = _as_scene(meshes)
    origin = np.asarray(pose.position, dtype=float)
    if scene.clearance(origin) < MIN_SENSOR_CLEARANCE:
        raise ValueError(f"sensor at {pose.position} is closer than "
                         f"{MIN_SENSOR_CLEARANCE} m to a surface")
    dirs = ray_directions(config) @ np.asarray(pose.orientation).T
    t, tri = scene.bvh.intersect(origin, dirs, config.min_range, config.max_range)
    hit = tri >= 0
    points = origin + dirs[hit] * t[hit, None]
    return LabeledPointCloud.from_labels(points, scene.semantic[tri[hit]],
                                         scene.instance[tri[hit]])


def simulate_lidar_scans(meshes, poses, config=None):
    """One cloud per pose, in pose order."""
    scene = _as_scene(meshes)
    return [simulate_lidar_scan(scene, pose, config) for pose in poses]


def merge_scans(clouds):
    """Concatenate scans in input order."""
    return LabeledPointCloud.concatenate(clouds)
