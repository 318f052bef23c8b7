"""Labeled point-cloud text files and the dataset manifest.

Cloud files hold one point per line, ``X Y Z R G B sem inst``, with six
decimals on coordinates and integers elsewhere.
"""
from __future__ import annotations

import dataclasses
import json
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cloud import LabeledPointCloud
from .errors import CloudFormatError, ManifestError
from .geometry import CLASS_NAMES

FIELDS_PER_LINE = 8
SAMPLING_MODES = ("MSP", "RSLP", "PSLP")


def format_cloud(cloud):
    lines = [
        f"{x:.6f} {y:.6f} {z:.6f} {r} {g} {b} {s} {i}"
        for (x, y, z), (r, g, b), s, i in zip(
            cloud.positions.tolist(), cloud.colors.tolist(),
            cloud.semantic.tolist(), cloud.instance.tolist())
    ]
    return "".join(line + "\n" for line in lines)


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_cloud_txt(cloud, path):
    try:
        atomic_write_text(path, format_cloud(cloud))
    except OSError as exc:
        raise OSError(f"cannot write point cloud to {path}: {exc}") from exc


def read_cloud_txt(path):
    try:
        with open(path, "r", encoding="ascii", newline=None) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read point cloud {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise CloudFormatError(path, 0, f"not an ASCII text file ({exc.reason})") from exc

    xyz, rest = [], []
    for line_no, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != FIELDS_PER_LINE:
            raise CloudFormatError(
                path, line_no, f"expected {FIELDS_PER_LINE} fields, found {len(parts)}")
        try:
            coords = [float(p) for p in parts[:3]]
            ints = [int(p) for p in parts[3:]]
        except ValueError as exc:
            raise CloudFormatError(path, line_no, f"malformed value ({exc})") from exc
        if not all(np.isfinite(coords)):
            raise CloudFormatError(path, line_no, "non-finite coordinate")
        if not all(0 <= c <= 255 for c in ints[:3]):
            raise CloudFormatError(path, line_no, "color channel outside [0, 255]")
        if ints[3] < 0 or ints[4] < 0:
            raise CloudFormatError(path, line_no, "negative label")
        xyz.append(coords)
        rest.append(ints)
    if not xyz:
        return LabeledPointCloud.empty()
    rest = np.asarray(rest, dtype=np.int64)
    return LabeledPointCloud(np.asarray(xyz), rest[:, :3], rest[:, 3], rest[:, 4])


# ------------------------------------------------------------------ manifest

@dataclass
class ManifestEntry:
    bridge_id: str
    bridge_index: int
    split: str
    spec_seed: int
    mode: str
    path: str
    occluded: bool = False
    occlusion_count: int = 0
    sparsity: float = 0.0
    voxel_size: float | None = None
    color_scheme: str = "white"
    augmented: bool = False
    point_count: int = 0

    def __post_init__(self):
        if self.mode not in SAMPLING_MODES:
            raise ManifestError(f"entry {self.bridge_id}: mode {self.mode!r} not in {SAMPLING_MODES}")


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)
    tool_version: str = ""
    master_seed: int = 0
    class_map: dict = field(default_factory=lambda: {v: k for k, v in CLASS_NAMES.items()})
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        paths = [e.path for e in self.entries]
        if len(paths) != len(set(paths)):
            raise ManifestError("manifest entries must have unique file paths")

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data, source="manifest"):
        if not isinstance(data, dict):
            raise ManifestError(f"{source}: top level must be an object")
        data = _check_keys(data, cls, source)
        raw_entries = data.get("entries", [])
        if not isinstance(raw_entries, list):
            raise ManifestError(f"{source}: 'entries' must be a list")
        entries = [ManifestEntry(**_check_keys(e, ManifestEntry, f"{source}: entries[{k}]"))
                   for k, e in enumerate(raw_entries)]
        data["entries"] = entries
        return cls(**data)


def _check_keys(data, cls, where):
    if not isinstance(data, dict):
        raise ManifestError(f"{where}: expected an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    required = [n for n, f in known.items()
                if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING]
    for name in required:
        if name not in data:
            raise ManifestError(f"{where}: missing required key {name!r}")
    extra = sorted(set(data) - set(known))
    if extra:
        warnings.warn(f"{where}: ignoring unknown keys {extra}", stacklevel=3)
    return {k: v for k, v in data.items() if k in known}


def write_manifest(manifest, path):
    atomic_write_text(path, manifest.to_json())


def read_manifest(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
    data_keys_required = ("entries", "tool_version", "master_seed")
    for key in data_keys_required:
        if isinstance(data, dict) and key not in data:
            raise ManifestError(f"{path}: missing required key {key!r}")
    return DatasetManifest.from_dict(data, source=str(path))
