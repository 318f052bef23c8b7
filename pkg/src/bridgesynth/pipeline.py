"""End-to-end dataset production and dataset composition."""
from __future__ import annotations

import dataclasses
import json
import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .augmentation import (COLOR_SCHEMES, AugmentConfig, apply_occlusion,
                           apply_standard_augmentations, colorize, generate_occlusion_shapes,
                           voxel_downsample)
from .dataset_io import (SAMPLING_MODES, DatasetManifest, ManifestEntry, write_cloud_txt,
                         write_manifest)
from .errors import ConfigurationError
from .geometry import (AABB, ParameterRanges, bridge_bbox, build_bridge_meshes,
                       generate_bridge_spec)
from .sampling import (LidarConfig, Scene, clear_sensor_poses, merge_scans, place_sensors_pslp,
                       place_sensors_rslp, pslp_grid_shape, sample_mesh_surface,
                       simulate_lidar_scans)
from .seeding import derive_seed

log = logging.getLogger(__name__)

DEFAULT_SPLIT = (52 / 60, 8 / 60)
VOXEL_PRESETS = {"preprocess": 0.02, "model": 0.2}
FAST_LIDAR_RESOLUTION = 2.0
FAST_MSP_DENSITY = 50.0


@dataclass(frozen=True)
class PipelineConfig:
    output_dir: str
    bridge_count: int = 60
    master_seed: int = 0
    modes: tuple = ("PSLP",)
    occlusion: bool = False
    occlusion_count: int = 10
    sparsity: float = 0.6
    keep_clean: bool = True
    voxel_size: float | None = VOXEL_PRESETS["preprocess"]
    color_scheme: str = "white"
    augment: AugmentConfig | None = None
    split: tuple = DEFAULT_SPLIT
    lidar_resolution: float = 0.4
    msp_density: float = 1000.0
    ranges: ParameterRanges = field(default_factory=ParameterRanges)
    workers: int = 1

    def __post_init__(self):
        modes = tuple(m.upper() for m in self.modes)
        object.__setattr__(self, "modes", modes)
        if self.bridge_count < 1:
            raise ConfigurationError("bridge_count must be >= 1")
        if not modes or any(m not in SAMPLING_MODES for m in modes):
            raise ConfigurationError(f"modes must be a non-empty subset of {SAMPLING_MODES}")
        if len(set(modes)) != len(modes):
            raise ConfigurationError("duplicate sampling mode")
        if len(self.split) != 2 or min(self.split) < 0 or abs(sum(self.split) - 1.0) > 1e-9:
            raise ConfigurationError("split must be two non-negative fractions summing to 1")
        if not 0.0 <= self.sparsity <= 1.0:
            raise ConfigurationError("sparsity must lie in [0, 1]")
        if self.occlusion_count < 0:
            raise ConfigurationError("occlusion_count must be non-negative")
        if self.voxel_size is not None and not self.voxel_size > 0:
            raise ConfigurationError("voxel_size must be positive")
        if self.color_scheme not in COLOR_SCHEMES:
            raise ConfigurationError(f"color_scheme must be one of {COLOR_SCHEMES}")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        self.ranges.validate()

    @property
    def train_count(self):
        return int(round(self.bridge_count * self.split[0]))

    def describe(self):
        """JSON-friendly settings recorded in the manifest (output location excluded)."""
        d = dataclasses.asdict(self)
        for key in ("output_dir", "workers"):
            d.pop(key)
        return json.loads(json.dumps(d))


def sample_bridge(meshes, mode, config, seed, spec=None):
    """Point cloud of one bridge in sampling ``mode`` (MSP, RSLP or PSLP)."""
    if mode == "MSP":
        return sample_mesh_surface(meshes, config.msp_density, seed)
    bbox = bridge_bbox(meshes)
    lidar = LidarConfig.with_resolution(config.lidar_resolution)
    if mode == "RSLP":
        deck_top = spec.deck_top_z if spec is not None else bbox.max[2]
        poses = place_sensors_rslp(bbox, deck_top)
    else:
        rows, cols = pslp_grid_shape(bbox)
        soffit = spec.pier_height if spec is not None else None
        poses = place_sensors_pslp(bbox, rows, cols, soffit_z=soffit)
    poses = clear_sensor_poses(poses, [m.bbox() for m in meshes])
    return merge_scans(simulate_lidar_scans(Scene(meshes), poses, lidar))


def _variant_name(occluded, sparsity):
    return f"occ{int(round(sparsity * 100))}" if occluded else "clean"


def process_bridge(config, index):
    """Generate, transform and write every file of bridge ``index``.

    Returns the manifest entries in a fixed order (mode, then clean/occluded).
    """
    out = Path(config.output_dir)
    master = config.master_seed
    spec_seed = derive_seed(master, index, "geometry")
    spec = generate_bridge_spec(spec_seed, config.ranges)
    meshes = build_bridge_meshes(spec)
    split = "train" if index < config.train_count else "val"

    if config.occlusion:
        variants = [False, True] if config.keep_clean else [True]
    else:
        variants = [False]

    entries = []
    for mode in config.modes:
        cloud = sample_bridge(meshes, mode, config, derive_seed(master, index, "sampling", mode),
                              spec)
        for occluded in variants:
            variant = _variant_name(occluded, config.sparsity)
            c = cloud
            if occluded:
                shapes = generate_occlusion_shapes(
                    AABB.from_points(c.positions), config.occlusion_count,
                    derive_seed(master, index, "occlusion", mode))
                c = apply_occlusion(c, shapes, config.sparsity,
                                    derive_seed(master, index, "occlusion-drop", mode))
            if config.voxel_size:
                c = voxel_downsample(c, config.voxel_size)
            if len(c):
                c = colorize(c, config.color_scheme,
                             derive_seed(master, index, "color", mode, variant))
            if config.augment is not None:
                c = apply_standard_augmentations(
                    c, config.augment, derive_seed(master, index, "augment", mode, variant))
            bridge_id = f"bridge_{index:04d}_{mode.lower()}"
            if occluded:
                bridge_id += f"_{variant}"
            rel = f"{split}/{bridge_id}.txt"
            write_cloud_txt(c, out / rel)
            entries.append(ManifestEntry(
                bridge_id=bridge_id, bridge_index=index, split=split, spec_seed=spec_seed,
                mode=mode, path=rel, occluded=occluded,
                occlusion_count=config.occlusion_count if occluded else 0,
                sparsity=config.sparsity if occluded else 0.0,
                voxel_size=config.voxel_size, color_scheme=config.color_scheme,
                augmented=config.augment is not None, point_count=len(c)))
            log.info("wrote %s (%d points)", rel, len(c))
    return entries


def run_pipeline(config):
    """Produce the dataset described by ``config`` and return its manifest.

    Bridges are independent; with ``workers > 1`` they run in separate
    processes. Output bytes do not depend on the worker count.
    """
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc

    indices = range(config.bridge_count)
    if config.workers == 1:
        per_bridge = [process_bridge(config, i) for i in indices]
    else:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=config.workers, mp_context=ctx) as pool:
            per_bridge = list(pool.map(process_bridge, [config] * len(indices), indices))

    manifest = DatasetManifest(
        entries=[e for entries in per_bridge for e in entries],
        tool_version=__version__,
        master_seed=config.master_seed,
        config=config.describe(),
    )
    write_manifest(manifest, out / "manifest.json")
    return manifest


def compose_datasets(manifests, roots=None):
    """Union of several manifests, e.g. a PSLP and an RSLP dataset.

    With ``roots`` each entry path is re-rooted under its dataset directory.
    Duplicate ``(bridge_id, mode)`` pairs are rejected.
    """
    manifests = list(manifests)
    if not manifests:
        raise ConfigurationError("nothing to compose")
    if roots is not None and len(roots) != len(manifests):
        raise ConfigurationError("need one root per manifest")
    if len(manifests) == 1 and roots is None:
        return manifests[0]
    seen = set()
    entries = []
    for k, man in enumerate(manifests):
        for e in man.entries:
            key = (e.bridge_id, e.mode)
            if key in seen:
                raise ConfigurationError(f"duplicate entry {key} while composing datasets")
            seen.add(key)
            if roots is not None:
                e = dataclasses.replace(e, path=str(Path(roots[k]) / e.path))
            entries.append(e)
    return DatasetManifest(
        entries=entries,
        tool_version=__version__,
        master_seed=manifests[0].master_seed,
        config={"composed_from": [m.config for m in manifests]},
    )
