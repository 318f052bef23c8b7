from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError


@dataclass(frozen=True)
class SensorPose:
    position: tuple
    orientation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        rot = np.asarray(self.orientation, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(pos)):
            raise ValueError("sensor position must be finite")
        if not (np.allclose(rot @ rot.T, np.eye(3), atol=1e-9)
                and np.isclose(np.linalg.det(rot), 1.0, atol=1e-9)):
            raise ValueError("sensor orientation must be a proper rotation")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", rot)


OPERATOR_HEIGHT = 1.8
GROUND_SENSOR_HEIGHT = 1.5
GROUND_LATERAL_OFFSET = 5.0
PSLP_ROWS = (4, 6)
PSLP_COLS = (8, 12)


def place_sensors_rslp(bbox, deck_top_z, operator_height=OPERATOR_HEIGHT,
                       ground_height=GROUND_SENSOR_HEIGHT,
                       lateral_offset=GROUND_LATERAL_OFFSET, per_group=6):
    """Twelve operator-accessible stations: six on the deck and six on the ground.

    Deck stations sit on the bridge axis (y = bbox centre), evenly spaced along
    x. Ground stations stand ``lateral_offset`` outside the bbox, alternating
    between the two sides.
    """
    lo, hi = np.asarray(bbox.min), np.asarray(bbox.max)
    xs = lo[0] + (hi[0] - lo[0]) * (np.arange(per_group) + 0.5) / per_group
    yc = (lo[1] + hi[1]) / 2.0
    poses = [SensorPose((x, yc, deck_top_z + operator_height)) for x in xs]
    for k, x in enumerate(xs):
        y = hi[1] + lateral_offset if k % 2 == 0 else lo[1] - lateral_offset
        poses.append(SensorPose((x, y, ground_height)))
    return poses


def pslp_grid_shape(bbox, row_spacing=4.0, col_spacing=12.0):
    """Rows/columns for a PSLP grid scaled to the bridge footprint."""
    ext = bbox.extent
    rows = int(np.clip(np.ceil(ext[1] / row_spacing), *PSLP_ROWS))
    cols = int(np.clip(np.ceil(ext[0] / col_spacing), *PSLP_COLS))
    return rows, cols


def place_sensors_pslp(bbox, rows, cols, levels=4, margin=2.0, soffit_z=None,
                       above_offsets=(2.0, 5.0)):
    """Dense grid of ``levels`` x ``rows`` x ``cols`` stations around the bridge.

    Half the levels sit above ``bbox.max.z`` (at ``above_offsets``), the other
    half between the ground and ``soffit_z`` (the underside of the
    superstructure; defaults to half the bbox height). Rows run across the
    bridge (y), columns along it (x), both spanning the footprint plus
    ``margin``.
    """
    if not PSLP_ROWS[0] <= rows <= PSLP_ROWS[1]:
        raise ConfigurationError(f"rows must be in {PSLP_ROWS}, got {rows}")
    if not PSLP_COLS[0] <= cols <= PSLP_COLS[1]:
        raise ConfigurationError(f"cols must be in {PSLP_COLS}, got {cols}")
    if levels < 2 or levels % 2:
        raise ConfigurationError("levels must be an even number >= 2")
    lo, hi = np.asarray(bbox.min), np.asarray(bbox.max)
    half = levels // 2
    if soffit_z is None:
        soffit_z = lo[2] + 0.5 * (hi[2] - lo[2])
    above = np.asarray(above_offsets, dtype=float)
    if len(above) != half:
        above = np.linspace(above_offsets[0], above_offsets[-1], half)
    below = lo[2] + (soffit_z - lo[2]) * np.arange(1, half + 1) / (half + 1)
    heights = np.concatenate([hi[2] + above, below])
    xs = np.linspace(lo[0] - margin, hi[0] + margin, cols)
    ys = np.linspace(lo[1] - margin, hi[1] + margin, rows)
    return [SensorPose((x, y, z)) for z in heights for y in ys for x in xs]


def clear_sensor_poses(poses, obstacles, clearance=0.05):
    """Move poses that fall inside any obstacle AABB sideways (along y) out of it."""
    out = []
    for pose in poses:
        p = np.asarray(pose.position, dtype=float)
        for _ in range(len(obstacles) + 1):
            blocking = [b for b in obstacles if b.contains(p, margin=clearance)[0]]
            if not blocking:
                break
            b = blocking[0]
            up = b.max[1] + 2 * clearance - p[1]
            down = p[1] - (b.min[1] - 2 * clearance)
            p[1] += up if up <= down else -down
        out.append(SensorPose(p, pose.orientation))
    return out
