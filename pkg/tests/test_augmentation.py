import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bridgesynth.augmentation import (AugmentConfig, OcclusionShape, apply_occlusion,
                                      apply_standard_augmentations, colorize, crop_blocks,
                                      draw_augmentation, generate_occlusion_shapes, inside_any,
                                      voxel_downsample)
from bridgesynth.cloud import LabeledPointCloud
from bridgesynth.errors import ConfigurationError
from bridgesynth.geometry import AABB

IDENTITY = AugmentConfig(scale_range=(1.0, 1.0), z_rotation_range=(0.0, 0.0),
                         xy_tilt_range=(0.0, 0.0), flip_probability=0.0)


def random_cloud(n, seed=0, scale=10.0):
    rng = np.random.default_rng(seed)
    return LabeledPointCloud(rng.random((n, 3)) * scale, rng.integers(0, 256, (n, 3)),
                             rng.integers(0, 5, n), rng.integers(0, 40, n))


def multiset(cloud):
    rows = np.column_stack([cloud.positions, cloud.colors, cloud.semantic, cloud.instance])
    return sorted(map(tuple, rows.tolist()))


# ---------------------------------------------------------------- shapes

BOX = AABB((0, 0, 0), (40, 10, 8))


def test_zero_shapes():
    assert generate_occlusion_shapes(BOX, 0, seed=1) == []


def test_shapes_deterministic():
    assert generate_occlusion_shapes(BOX, 10, 4) == generate_occlusion_shapes(BOX, 10, 4)
    assert generate_occlusion_shapes(BOX, 10, 4) != generate_occlusion_shapes(BOX, 10, 5)


def test_shape_kind_frequencies():
    shapes = generate_occlusion_shapes(BOX, 10_000, seed=2)
    counts = {k: sum(s.kind == k for s in shapes) for k in ("cube", "sphere", "prism")}
    sigma = math.sqrt(10_000 * (1 / 3) * (2 / 3))
    for c in counts.values():
        assert abs(c - 10_000 / 3) <= 3 * sigma


def test_shape_centres_and_sizes():
    shapes = generate_occlusion_shapes(BOX, 2000, seed=3)
    centers = np.array([s.center for s in shapes])
    assert np.all(centers >= BOX.min) and np.all(centers <= BOX.max)
    diag = BOX.diagonal
    for s in shapes:
        size = 2 * s.extents[0] if s.kind == "sphere" else s.extents[0]
        assert 0.05 * diag <= size <= 0.20 * diag


def test_degenerate_bbox_raises():
    with pytest.raises(ConfigurationError):
        generate_occlusion_shapes(AABB((1, 1, 1), (1, 1, 1)), 3, 0)


def test_negative_count_raises():
    with pytest.raises(ConfigurationError):
        generate_occlusion_shapes(BOX, -1, 0)


def test_shape_rejects_bad_extents():
    with pytest.raises(ValueError):
        OcclusionShape("cube", (0, 0, 0), (0.0,))
    with pytest.raises(ValueError):
        OcclusionShape("prism", (0, 0, 0), (1.0, 1.0))


def test_sphere_and_cube_containment():
    sphere = OcclusionShape("sphere", (1, 1, 1), (0.5,))
    assert sphere.contains([[1, 1, 1.49], [1, 1, 1.51]]).tolist() == [True, False]
    cube = OcclusionShape("cube", (0, 0, 0), (2.0,), rotation=np.pi / 4)
    # rotated 45 degrees: the corner direction (1, 0) now reaches sqrt(2)
    assert cube.contains([[1.4, 0, 0], [1.0, 1.0, 0], [0, 0, 1.01]]).tolist() == [True, False, False]


def _in_triangle(p, a, b, c):
    def side(p1, p2, p3):
        return (p1[0] - p3[0]) * (p2[1] - p3[1]) - (p2[0] - p3[0]) * (p1[1] - p3[1])
    d1, d2, d3 = side(p, a, b), side(p, b, c), side(p, c, a)
    return not ((min(d1, d2, d3) < 0) and (max(d1, d2, d3) > 0))


def test_prism_containment_matches_triangle_test():
    rng = np.random.default_rng(0)
    shape = OcclusionShape("prism", (1.0, 2.0, 3.0), (2.0, 1.5, 1.0), rotation=0.7)
    c, s = np.cos(0.7), np.sin(0.7)
    rot = np.array([[c, -s], [s, c]])
    corners = [rot @ v + [1.0, 2.0] for v in ([-1.0, -0.75], [1.0, -0.75], [0.0, 0.75])]
    pts = np.array([1, 2, 3]) + rng.uniform(-1.5, 1.5, size=(3000, 3))
    got = shape.contains(pts)
    want = np.array([_in_triangle(p[:2], *corners) and abs(p[2] - 3) <= 0.5 for p in pts])
    assert got.sum() > 100
    np.testing.assert_array_equal(got, want)


# ---------------------------------------------------------------- occlusion

def _in_shape_cloud(n=12_000, seed=0):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, size=(n, 3))
    cloud = LabeledPointCloud.from_labels(pts, rng.integers(0, 5, n), np.arange(n))
    return cloud, [OcclusionShape("cube", (0, 0, 0), (2.0,))]


def test_sparsity_zero_is_identity():
    cloud, shapes = _in_shape_cloud(500)
    assert apply_occlusion(cloud, shapes, 0.0, seed=3).equals(cloud)


def test_sparsity_one_empties_shapes():
    cloud = random_cloud(5000)
    shapes = generate_occlusion_shapes(AABB.from_points(cloud.positions), 6, seed=2)
    out = apply_occlusion(cloud, shapes, 1.0, seed=3)
    assert inside_any(out.positions, shapes).sum() == 0
    assert len(out) == (~inside_any(cloud.positions, shapes)).sum()


def test_sparsity_point_six_binomial_bound():
    cloud, shapes = _in_shape_cloud(10_000)
    kept = len(apply_occlusion(cloud, shapes, 0.6, seed=11))
    assert abs(kept - 4000) <= 4 * math.sqrt(10_000 * 0.6 * 0.4)


@pytest.mark.parametrize("sparsity", [0.2, 0.4, 0.6, 0.8])
def test_survival_rate_chi_squared(sparsity):
    cloud, shapes = _in_shape_cloud(20_000, seed=5)
    kept = len(apply_occlusion(cloud, shapes, sparsity, seed=17))
    n = len(cloud)
    exp_keep, exp_drop = n * (1 - sparsity), n * sparsity
    chi2 = (kept - exp_keep) ** 2 / exp_keep + ((n - kept) - exp_drop) ** 2 / exp_drop
    assert chi2 < 10.83  # chi-squared 1 dof, p = 0.001


def test_occlusion_leaves_outside_points_alone():
    cloud = random_cloud(3000, seed=4)
    shapes = [OcclusionShape("sphere", (5, 5, 5), (2.0,))]
    out = apply_occlusion(cloud, shapes, 0.7, seed=0)
    outside = ~inside_any(cloud.positions, shapes)
    out_outside = ~inside_any(out.positions, shapes)
    np.testing.assert_array_equal(out.positions[out_outside], cloud.positions[outside])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.integers(0, 8))
def test_occlusion_only_removes(seed, sparsity, count):
    n = 400
    cloud = random_cloud(n, seed % 1000)
    cloud = LabeledPointCloud(cloud.positions, cloud.colors, cloud.semantic, np.arange(n))
    shapes = generate_occlusion_shapes(AABB.from_points(cloud.positions), count, seed)
    out = apply_occlusion(cloud, shapes, sparsity, seed)
    idx = out.instance
    assert np.all(np.diff(idx) > 0)  # order preserved, no duplicates
    np.testing.assert_array_equal(out.positions, cloud.positions[idx])
    np.testing.assert_array_equal(out.semantic, cloud.semantic[idx])


def test_occlusion_rejects_bad_sparsity():
    cloud, shapes = _in_shape_cloud(10)
    with pytest.raises(ConfigurationError):
        apply_occlusion(cloud, shapes, 1.5, 0)


# ---------------------------------------------------------------- voxels

def voxel_oracle(positions, size):
    """Dictionary-based reference: nearest point to each voxel centroid, lowest index on ties
    (distances within 1e-9 voxel sizes count as equal)."""
    groups = {}
    for i, p in enumerate(positions):
        groups.setdefault(tuple(math.floor(c / size) for c in p), []).append(i)
    keep = []
    for members in groups.values():
        centroid = positions[members].mean(axis=0)
        d = [float(np.linalg.norm(positions[i] - centroid)) for i in members]
        keep.append(next(i for i, di in zip(members, d) if di <= min(d) + 1e-9 * size))
    return sorted(keep)


def test_voxel_single_cell():
    cloud = LabeledPointCloud.from_labels(np.random.default_rng(0).random((50, 3)) * 0.01,
                                          np.zeros(50, int), np.arange(50))
    assert len(voxel_downsample(cloud, 0.02)) == 1


def test_voxel_sparse_grid_unchanged():
    g = np.stack(np.meshgrid(*[np.arange(4) * 0.05] * 3, indexing="ij"), -1).reshape(-1, 3) + 0.001
    cloud = LabeledPointCloud.from_labels(g, np.zeros(len(g), int), np.zeros(len(g), int))
    assert voxel_downsample(cloud, 0.02).equals(cloud)


def test_voxel_hand_example():
    pts = np.array([[0.1, 0.1, 0.1], [0.5, 0.5, 0.5], [0.8, 0.8, 0.8],   # voxel A, centroid 0.4667
                    [1.2, 0.5, 0.5], [1.9, 0.5, 0.5]])                   # voxel B, centroid 1.55
    cloud = LabeledPointCloud.from_labels(pts, [0, 1, 2, 3, 4], [0, 1, 2, 3, 4])
    out = voxel_downsample(cloud, 1.0)
    # A: distances .636, .058, .577 -> index 1; B: tie .35/.35 -> lower index 3
    np.testing.assert_array_equal(out.instance, [1, 3])
    np.testing.assert_array_equal(out.positions, pts[[1, 3]])


@pytest.mark.parametrize("seed,size", [(0, 0.5), (1, 1.0), (2, 2.5), (3, 0.1)])
def test_voxel_matches_oracle(seed, size):
    cloud = random_cloud(1500, seed)
    cloud = LabeledPointCloud(cloud.positions, cloud.colors, cloud.semantic, np.arange(1500))
    out = voxel_downsample(cloud, size)
    assert out.instance.tolist() == voxel_oracle(cloud.positions, size)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 3.0))
def test_voxel_subset_and_idempotent(seed, size):
    cloud = random_cloud(300, seed)
    once = voxel_downsample(cloud, size)
    assert set(multiset(once)) <= set(multiset(cloud))
    assert voxel_downsample(once, size).equals(once)
    keys = np.floor(once.positions / size)
    assert len(np.unique(keys, axis=0)) == len(once)


def test_voxel_rejects_nonpositive():
    with pytest.raises(ConfigurationError):
        voxel_downsample(random_cloud(3), 0.0)


def test_voxel_empty_cloud():
    assert len(voxel_downsample(LabeledPointCloud.empty(), 0.1)) == 0


# ---------------------------------------------------------------- colors

def test_white():
    out = colorize(random_cloud(20), "white")
    assert np.all(out.colors == 255)


def test_random_rgb_deterministic():
    cloud = random_cloud(200)
    a, b = colorize(cloud, "random_rgb", 9), colorize(cloud, "random_rgb", 9)
    np.testing.assert_array_equal(a.colors, b.colors)
    assert len(np.unique(a.colors, axis=0)) > 150
    assert not np.array_equal(a.colors, colorize(cloud, "random_rgb", 10).colors)


def test_height_gradient_endpoints():
    cloud = random_cloud(100)
    out = colorize(cloud, "height_gradient", low=(10, 20, 30), high=(250, 120, 0))
    z = cloud.positions[:, 2]
    assert out.colors[np.argmin(z)].tolist() == [10, 20, 30]
    assert out.colors[np.argmax(z)].tolist() == [250, 120, 0]


def test_height_gradient_midpoint():
    pts = np.array([[0, 0, 0.0], [0, 0, 1.0], [0, 0, 2.0]])
    cloud = LabeledPointCloud.from_labels(pts, [0] * 3, [0] * 3)
    out = colorize(cloud, "height_gradient", low=(0, 0, 0), high=(200, 100, 50))
    assert out.colors[1].tolist() == [100, 50, 25]


def test_height_gradient_flat_cloud_uses_low_anchor():
    pts = np.zeros((5, 3))
    cloud = LabeledPointCloud.from_labels(pts, [0] * 5, [0] * 5)
    out = colorize(cloud, "height_gradient", low=(1, 2, 3))
    assert np.all(out.colors == [1, 2, 3])


def test_unknown_scheme():
    with pytest.raises(ConfigurationError):
        colorize(random_cloud(3), "sepia")


# ---------------------------------------------------------------- augment

def test_identity_config():
    cloud = random_cloud(100)
    assert apply_standard_augmentations(cloud, IDENTITY, seed=5).equals(cloud)


def _max_pairwise(p):
    d = p[:, None, :] - p[None, :, :]
    return np.sqrt((d ** 2).sum(-1)).max()


@pytest.mark.parametrize("seed", range(8))
def test_distances_scale_by_s(seed):
    cloud = random_cloud(150, seed)
    cfg = AugmentConfig(flip_probability=0.5)
    s, _, _ = draw_augmentation(cfg, seed)
    out = apply_standard_augmentations(cloud, cfg, seed)
    assert _max_pairwise(out.positions) == pytest.approx(s * _max_pairwise(cloud.positions),
                                                         rel=1e-12)
    np.testing.assert_allclose(out.positions.mean(axis=0), cloud.positions.mean(axis=0),
                               atol=1e-9)


def test_scale_draws_within_ten_percent():
    cfg = AugmentConfig()
    scales = np.array([draw_augmentation(cfg, seed)[0] for seed in range(10_000)])
    assert scales.min() >= 0.9 and scales.max() <= 1.1


def test_flip_mirrors_y():
    cfg = AugmentConfig(scale_range=(1.0, 1.0), z_rotation_range=(0, 0),
                        xy_tilt_range=(0, 0), flip_probability=1.0)
    pts = np.array([[0, 1.0, 0], [0, -1.0, 0], [2, 3.0, 1]])
    cloud = LabeledPointCloud.from_labels(pts, [0] * 3, [0] * 3)
    out = apply_standard_augmentations(cloud, cfg, 0)
    c = pts.mean(axis=0)
    np.testing.assert_allclose(out.positions[:, 1], 2 * c[1] - pts[:, 1])
    np.testing.assert_allclose(out.positions[:, [0, 2]], pts[:, [0, 2]])


@pytest.mark.parametrize("bad", [(0.4, 1.0), (1.0, 1.6), (1.1, 0.9)])
def test_scale_range_validation(bad):
    with pytest.raises(ConfigurationError):
        AugmentConfig(scale_range=bad)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["augment", "white", "random_rgb",
                                                "height_gradient", "voxel_free"]))
def test_label_multiset_preserved(seed, op):
    cloud = random_cloud(120, seed % 997)
    if op == "augment":
        out = apply_standard_augmentations(cloud, AugmentConfig(), seed)
    elif op == "voxel_free":
        out = apply_standard_augmentations(cloud, IDENTITY, seed)
    else:
        out = colorize(cloud, op, seed)
    np.testing.assert_array_equal(out.label_pairs(), cloud.label_pairs())
    assert len(out) == len(cloud)


# ---------------------------------------------------------------- crop

def test_single_block_when_large():
    cloud = random_cloud(200)
    blocks = crop_blocks(cloud, (20, 20, 20))
    assert len(blocks) == 1 and blocks[0].equals(cloud)


def test_two_by_one_by_one_split():
    rng = np.random.default_rng(1)
    pts = rng.random((400, 3)) * [2, 1, 1]
    pts[0], pts[1] = [0, 0, 0], [2, 1, 1]
    cloud = LabeledPointCloud.from_labels(pts, [0] * 400, np.arange(400))
    blocks = crop_blocks(cloud, (1, 1, 1))
    assert len(blocks) == 2
    assert np.all(blocks[0].positions[:, 0] < 1) and np.all(blocks[1].positions[:, 0] >= 1)
    assert len(blocks[0]) + len(blocks[1]) == 400


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 12), st.floats(0.5, 12), st.floats(0.5, 12))
def test_crop_is_partition(seed, bx, by, bz):
    cloud = random_cloud(250, seed)
    blocks = crop_blocks(cloud, (bx, by, bz))
    assert sum(len(b) for b in blocks) == len(cloud)
    assert multiset(LabeledPointCloud.concatenate(blocks)) == multiset(cloud)
    for b in blocks:
        ext = b.positions.max(axis=0) - b.positions.min(axis=0)
        assert np.all(ext <= np.array([bx, by, bz]) + 1e-9)


def test_crop_empty_and_invalid():
    assert crop_blocks(LabeledPointCloud.empty(), 1.0) == []
    with pytest.raises(ConfigurationError):
        crop_blocks(random_cloud(5), (1, 0, 1))
