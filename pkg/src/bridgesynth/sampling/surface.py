import numpy as np

from ..cloud import LabeledPointCloud
from ..seeding import derive_seed


def sample_triangles(corners, count, rng):
    """Draw ``count`` points uniformly over the union of triangles ``corners`` (T, 3, 3)."""
    areas = 0.5 * np.linalg.norm(
        np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]), axis=1)
    tri = rng.choice(len(corners), size=count, p=areas / areas.sum())
    u = rng.random((count, 1))
    v = rng.random((count, 1))
    # reflect samples from the far half of the unit square back into the triangle
    flip = (u + v) > 1.0
    u = np.where(flip, 1.0 - u, u)
    v = np.where(flip, 1.0 - v, v)
    c = corners[tri]
    return c[:, 0] + u * (c[:, 1] - c[:, 0]) + v * (c[:, 2] - c[:, 0])


def sample_mesh_surface(meshes, density, seed=0):
    """Mesh-sampled point cloud (MSP): area-weighted uniform samples per component.

    Each mesh receives ``round(area * density)`` points from its own random
    stream keyed by ``(seed, instance_id)``, so sampling one component alone
    reproduces exactly the points it contributes to the merged cloud.
    """
    meshes = list(meshes)
    if not meshes:
        raise ValueError("sample_mesh_surface needs at least one mesh")
    if not density > 0:
        raise ValueError("density must be positive")
    parts = []
    for mesh in meshes:
        count = int(np.floor(mesh.area * density + 0.5))
        if count == 0:
            continue
        rng = np.random.default_rng(derive_seed(seed, "msp", mesh.instance_id))
        points = sample_triangles(mesh.corners, count, rng)
        parts.append(LabeledPointCloud.from_labels(points, mesh.semantic_class, mesh.instance_id))
    return LabeledPointCloud.concatenate(parts)
