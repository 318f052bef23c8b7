"""Occlusion, voxel downsampling, colorization and geometric augmentations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import WHITE
from .errors import ConfigurationError
from .geometry import AABB

SHAPE_KINDS = ("cube", "sphere", "prism")
COLOR_SCHEMES = ("white", "random_rgb", "height_gradient")
HEIGHT_LOW = (0, 0, 255)
HEIGHT_HIGH = (255, 0, 0)
TIE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class OcclusionShape:
    """An occluder. ``extents`` is ``(edge,)`` for a cube, ``(radius,)`` for a
    sphere and ``(base, height, length)`` for a triangular prism whose
    triangle lies in the horizontal plane and whose axis is vertical."""

    kind: str
    center: tuple
    extents: tuple
    rotation: float = 0.0  # radians about +z

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ValueError(f"unknown occlusion shape {self.kind!r}")
        expected = {"cube": 1, "sphere": 1, "prism": 3}[self.kind]
        ext = tuple(float(e) for e in self.extents)
        if len(ext) != expected or min(ext) <= 0:
            raise ValueError(f"{self.kind} needs {expected} positive extent(s)")
        center = tuple(float(c) for c in self.center)
        if len(center) != 3 or not np.all(np.isfinite(center)):
            raise ValueError("shape center must be a finite 3D point")
        object.__setattr__(self, "extents", ext)
        object.__setattr__(self, "center", center)

    def contains(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 3) - self.center
        if self.kind == "sphere":
            return np.einsum("ij,ij->i", p, p) <= self.extents[0] ** 2
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        x = c * p[:, 0] + s * p[:, 1]
        y = -s * p[:, 0] + c * p[:, 1]
        z = p[:, 2]
        if self.kind == "cube":
            h = self.extents[0] / 2
            return (np.abs(x) <= h) & (np.abs(y) <= h) & (np.abs(z) <= h)
        base, height, length = self.extents
        # triangle (-b/2, -h/2), (b/2, -h/2), (0, h/2): width shrinks linearly with y
        half_width = base / 2 * (0.5 - y / height)
        return ((np.abs(z) <= length / 2) & (y >= -height / 2) & (y <= height / 2)
                & (np.abs(x) <= half_width))


def generate_occlusion_shapes(bbox, count, seed, size_range=(0.05, 0.20)):
    """Random occluders with centres uniform in ``bbox``.

    Characteristic size ``s`` is uniform in ``size_range`` times the bbox
    diagonal: cube edge ``s``, sphere radius ``s / 2``, prism base, height and
    length ``s``.
    """
    if count < 0:
        raise ConfigurationError("shape count must be non-negative")
    diag = bbox.diagonal
    if not diag > 0:
        raise ConfigurationError("cannot place occluders in a degenerate bbox")
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(bbox.min), np.asarray(bbox.max)
    shapes = []
    for _ in range(count):
        kind = SHAPE_KINDS[int(rng.integers(3))]
        center = lo + rng.random(3) * (hi - lo)
        size = diag * rng.uniform(*size_range)
        rotation = rng.uniform(0.0, 2 * np.pi)
        extents = {"cube": (size,), "sphere": (size / 2,), "prism": (size, size, size)}[kind]
        shapes.append(OcclusionShape(kind, tuple(center), extents, float(rotation)))
    return shapes


def inside_any(points, shapes):
    mask = np.zeros(len(points), dtype=bool)
    for shape in shapes:
        mask |= shape.contains(points)
    return mask


def apply_occlusion(cloud, shapes, sparsity, seed):
    """Thin out points inside the occluders.

    ``sparsity`` is the fraction removed: each point inside at least one shape
    is dropped independently with that probability. Point ``i`` always uses
    the ``i``-th draw of the seeded stream.
    """
    sparsity = float(sparsity)
    if not 0.0 <= sparsity <= 1.0:
        raise ConfigurationError("sparsity must lie in [0, 1]")
    u = np.random.default_rng(seed).random(len(cloud))
    drop = inside_any(cloud.positions, shapes) & (u < sparsity)
    return cloud.subset(~drop)


def voxel_downsample(cloud, voxel_size):
    """Keep one point per occupied voxel: the one nearest the voxel centroid.

    Survivors keep their original attributes and relative order. Ties go to
    the lower input index.
    """
    if not voxel_size > 0:
        raise ConfigurationError("voxel_size must be positive")
    n = len(cloud)
    if n == 0:
        return cloud.copy()
    keys = np.floor(cloud.positions / voxel_size).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((len(counts), 3))
    np.add.at(sums, inverse, cloud.positions)
    centroids = sums / counts[:, None]
    dist = np.linalg.norm(cloud.positions - centroids[inverse], axis=1)
    nearest = np.full(len(counts), np.inf)
    np.minimum.at(nearest, inverse, dist)
    # distances equal up to rounding count as ties
    cand = np.flatnonzero(dist <= nearest[inverse] + TIE_TOLERANCE * voxel_size)
    keep = np.full(len(counts), n)
    np.minimum.at(keep, inverse[cand], cand)
    return cloud.subset(np.sort(keep))


def colorize(cloud, scheme="white", seed=0, low=HEIGHT_LOW, high=HEIGHT_HIGH):
    n = len(cloud)
    if scheme == "white":
        colors = np.broadcast_to(np.asarray(WHITE, np.uint8), (n, 3))
    elif scheme == "random_rgb":
        colors = np.random.default_rng(seed).integers(0, 256, size=(n, 3))
    elif scheme == "height_gradient":
        if n == 0:
            raise ValueError("height_gradient needs a non-empty cloud")
        z = cloud.positions[:, 2]
        span = z.max() - z.min()
        frac = (z - z.min()) / span if span > 0 else np.zeros(n)
        lo, hi = np.asarray(low, float), np.asarray(high, float)
        colors = np.rint(lo + frac[:, None] * (hi - lo))
    else:
        raise ConfigurationError(f"unknown color scheme {scheme!r}; expected {COLOR_SCHEMES}")
    return cloud.with_colors(colors)


@dataclass(frozen=True)
class AugmentConfig:
    scale_range: tuple = (0.9, 1.1)
    z_rotation_range: tuple = (0.0, 360.0)
    xy_tilt_range: tuple = (-5.0, 5.0)
    flip_probability: float = 0.5
    block_size: tuple = (20.0, 20.0, 20.0)

    def __post_init__(self):
        lo, hi = self.scale_range
        if not 0.5 <= lo <= hi <= 1.5:
            raise ConfigurationError("scale_range must be an interval inside [0.5, 1.5]")
        for name in ("z_rotation_range", "xy_tilt_range"):
            a, b = getattr(self, name)
            if a > b:
                raise ConfigurationError(f"{name}: min exceeds max")
        if not 0.0 <= self.flip_probability <= 1.0:
            raise ConfigurationError("flip_probability must lie in [0, 1]")
        if len(self.block_size) != 3 or min(self.block_size) <= 0:
            raise ConfigurationError("block_size must be three positive lengths")


def _rotation(axis, degrees):
    a = np.deg2rad(degrees)
    c, s = np.cos(a), np.sin(a)
    i, j = [(1, 2), (2, 0), (0, 1)][axis]
    r = np.eye(3)
    r[i, i] = r[j, j] = c
    r[i, j], r[j, i] = -s, s
    return r


def draw_augmentation(config, seed):
    """Random scale, rotation angles (degrees) and flip flag for one sample."""
    rng = np.random.default_rng(seed)
    scale = rng.uniform(*config.scale_range)
    tilt_x = rng.uniform(*config.xy_tilt_range)
    tilt_y = rng.uniform(*config.xy_tilt_range)
    yaw = rng.uniform(*config.z_rotation_range)
    flip = bool(rng.random() < config.flip_probability)
    return float(scale), (float(tilt_x), float(tilt_y), float(yaw)), flip


def augmentation_matrix(scale, angles, flip):
    tilt_x, tilt_y, yaw = angles
    m = _rotation(2, yaw) @ _rotation(1, tilt_y) @ _rotation(0, tilt_x) * scale
    if flip:
        m = np.diag([1.0, -1.0, 1.0]) @ m
    return m


def apply_standard_augmentations(cloud, config, seed):
    """Scale about the centroid, tilt about x and y, spin about z, maybe mirror y.

    Labels, colors and point count are unchanged.
    """
    m = augmentation_matrix(*draw_augmentation(config, seed))
    if len(cloud) == 0 or np.array_equal(m, np.eye(3)):
        return cloud.copy()
    c = cloud.positions.mean(axis=0)
    return cloud.with_positions((cloud.positions - c) @ m.T + c)


def crop_blocks(cloud, block_size):
    """Partition the cloud into an axis-aligned block grid anchored at its bbox min.

    Blocks are returned in (ix, iy, iz) lexicographic order; empty blocks are
    omitted and points keep their relative order inside each block.
    """
    size = np.broadcast_to(np.asarray(block_size, dtype=float), (3,))
    if np.any(size <= 0):
        raise ConfigurationError("block_size must be positive")
    if len(cloud) == 0:
        return []
    box = AABB.from_points(cloud.positions)
    n_blocks = np.maximum(1, np.ceil(box.extent / size - 1e-12)).astype(np.int64)
    idx = np.floor((cloud.positions - np.asarray(box.min)) / size).astype(np.int64)
    idx = np.minimum(idx, n_blocks - 1)
    flat = np.ravel_multi_index(idx.T, n_blocks)
    order = np.argsort(flat, kind="stable")
    blocks, starts = np.unique(flat[order], return_index=True)
    bounds = list(starts) + [len(order)]
    return [cloud.subset(order[bounds[k]:bounds[k + 1]]) for k in range(len(blocks))]
