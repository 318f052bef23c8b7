"""Procedural reinforced-concrete bridge meshes.

The bridge axis runs along +x, the deck is centred on y = 0 and the ground
plane is z = 0. Every structural member is an independent closed triangle
mesh tagged with a semantic class and a per-bridge instance id.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import ConfigurationError


class SemanticClass(IntEnum):
    SLAB = 0
    BARRIER = 1
    GIRDER = 2
    PIER_CAP = 3
    PIER = 4


CLASS_NAMES = {c.value: c.name.lower() for c in SemanticClass}

GIRDER_SECTIONS = ("i_girder", "rectangular")
PIER_SECTIONS = ("circular", "rectangular")

# Vertical clearance left between stacked members (must stay <= 1 mm).
CONTACT_GAP = 5e-4
# Clear distance kept between same-class neighbours (girders, piers, span ends).
# Chosen above the default DBSCAN eps of 0.92 m so instances stay separable.
MIN_CLEAR_GAP = 1.0
CIRCLE_SEGMENTS = 24
# Pier caps stop short of the deck edges.
CAP_LENGTH_RATIO = 0.875


@dataclass(frozen=True)
class AABB:
    min: tuple
    max: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.min)
        hi = tuple(float(v) for v in self.max)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("AABB corners must be 3D")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"AABB min {lo} exceeds max {hi}")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @classmethod
    def from_points(cls, points):
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        if len(points) == 0:
            raise ValueError("cannot bound an empty point set")
        return cls(points.min(axis=0), points.max(axis=0))

    @property
    def extent(self):
        return np.subtract(self.max, self.min)

    @property
    def center(self):
        return (np.asarray(self.min) + np.asarray(self.max)) / 2.0

    @property
    def diagonal(self):
        return float(np.linalg.norm(self.extent))

    def contains(self, points, margin=0.0):
        points = np.atleast_2d(points)
        lo = np.asarray(self.min) - margin
        hi = np.asarray(self.max) + margin
        return np.all((points >= lo) & (points <= hi), axis=1)


@dataclass(eq=False)
class ComponentMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    semantic_class: int
    instance_id: int

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.semantic_class = int(SemanticClass(self.semantic_class))
        self.instance_id = int(self.instance_id)
        if self.instance_id < 0:
            raise ValueError("instance_id must be non-negative")
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise ValueError("triangle index out of range")

    @property
    def name(self):
        return f"{CLASS_NAMES[self.semantic_class]}_{self.instance_id}"

    @property
    def corners(self):
        """(T, 3, 3) array of triangle vertex positions."""
        return self.vertices[self.triangles]

    def triangle_areas(self):
        c = self.corners
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    @property
    def area(self):
        return float(self.triangle_areas().sum())

    def bbox(self):
        return AABB.from_points(self.vertices)

    def translated(self, offset):
        return ComponentMesh(self.vertices + np.asarray(offset, float), self.triangles.copy(),
                             self.semantic_class, self.instance_id)


@dataclass(frozen=True)
class ParameterRanges:
    """Closed sampling intervals for :func:`generate_bridge_spec` (meters unless noted)."""

    span_count: tuple = (1, 4)
    span_length: tuple = (15.0, 40.0)
    deck_width: tuple = (8.0, 15.0)
    girders_per_span: tuple = (4, 7)
    pier_count_per_bent: tuple = (1, 4)
    slab_thickness: tuple = (0.2, 0.3)
    barrier_height: tuple = (0.8, 1.1)
    barrier_width: tuple = (0.35, 0.5)
    girder_depth: tuple = (1.0, 2.0)
    girder_width: tuple = (0.3, 0.6)
    pier_size: tuple = (0.6, 1.2)
    pier_height: tuple = (4.0, 10.0)
    pier_cap_depth: tuple = (1.0, 1.5)
    pier_cap_width: tuple = (1.8, 2.4)
    girder_sections: tuple = GIRDER_SECTIONS
    pier_sections: tuple = PIER_SECTIONS

    # hard limits every range must respect
    BOUNDS = {
        "span_count": (1, None),
        "span_length": (15.0, 40.0),
        "deck_width": (8.0, 15.0),
        "girders_per_span": (4, 7),
        "pier_count_per_bent": (1, 4),
    }

    def validate(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name.endswith("sections"):
                allowed = GIRDER_SECTIONS if f.name.startswith("girder") else PIER_SECTIONS
                if not value or any(v not in allowed for v in value):
                    raise ConfigurationError(f"{f.name} must be a non-empty subset of {allowed}")
                continue
            lo, hi = value
            if lo > hi:
                raise ConfigurationError(f"{f.name}: min {lo} > max {hi}")
            if lo <= 0:
                raise ConfigurationError(f"{f.name}: values must be positive, got {lo}")
            bounds = self.BOUNDS.get(f.name)
            if bounds:
                blo, bhi = bounds
                if lo < blo or (bhi is not None and hi > bhi):
                    raise ConfigurationError(
                        f"{f.name}: range {value} outside allowed bounds [{blo}, {bhi}]")
        if self.pier_cap_width[0] < MIN_CLEAR_GAP + 0.2:
            raise ConfigurationError("pier_cap_width too small to seat girders from both spans")
        return self


@dataclass(frozen=True)
class BridgeSpec:
    seed: int
    span_lengths: tuple
    deck_width: float
    girders_per_span: int
    girder_section: str
    girder_depth: float
    girder_width: float
    pier_count_per_bent: int
    pier_section: str
    pier_size: float
    pier_height: float
    pier_cap_depth: float
    pier_cap_width: float
    slab_thickness: float
    barrier_height: float
    barrier_width: float
    span_joint: float = MIN_CLEAR_GAP
    contact_gap: float = CONTACT_GAP

    LENGTH_FIELDS = (
        "deck_width", "girder_depth", "girder_width", "pier_size", "pier_height",
        "pier_cap_depth", "pier_cap_width", "slab_thickness", "barrier_height",
        "barrier_width", "span_joint", "contact_gap",
    )

    def __post_init__(self):
        object.__setattr__(self, "span_lengths", tuple(float(s) for s in self.span_lengths))
        if self.span_count < 1:
            raise ValueError("a bridge needs at least one span")
        if self.girders_per_span < 1 or self.pier_count_per_bent < 1:
            raise ValueError("member counts must be >= 1")
        if self.girder_section not in GIRDER_SECTIONS:
            raise ValueError(f"unknown girder section {self.girder_section!r}")
        if self.pier_section not in PIER_SECTIONS:
            raise ValueError(f"unknown pier section {self.pier_section!r}")
        for name in self.LENGTH_FIELDS:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if min(self.span_lengths) <= 0:
            raise ValueError("span lengths must be strictly positive")

    @property
    def span_count(self):
        return len(self.span_lengths)

    @property
    def length(self):
        return float(sum(self.span_lengths))

    @property
    def pier_cap_count(self):
        return 2 if self.span_count == 1 else self.span_count - 1

    @property
    def pier_cap_length(self):
        return CAP_LENGTH_RATIO * self.deck_width

    @property
    def deck_top_z(self):
        g = self.contact_gap
        return (self.pier_height + g + self.pier_cap_depth + g + self.girder_depth + g
                + self.slab_thickness)

    def scaled(self, k):
        """Return a copy with every length multiplied by ``k``."""
        changes = {name: getattr(self, name) * k for name in self.LENGTH_FIELDS}
        changes["span_lengths"] = tuple(s * k for s in self.span_lengths)
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)


def generate_bridge_spec(seed, ranges=None):
    """Draw a random but fully reproducible :class:`BridgeSpec`.

    Member counts are capped so that neighbouring girders and piers keep at
    least ``MIN_CLEAR_GAP`` of clear space between them.
    """
    ranges = (ranges or ParameterRanges()).validate()
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ConfigurationError("seed must be an unsigned 64-bit integer")
    rng = np.random.default_rng(seed)

    def uniform(name):
        lo, hi = getattr(ranges, name)
        return float(rng.uniform(lo, hi))

    def integer(lo, hi):
        return int(rng.integers(lo, hi + 1))

    span_count = integer(*ranges.span_count)
    span_lengths = tuple(float(v) for v in rng.uniform(*ranges.span_length, size=span_count))
    deck_width = uniform("deck_width")

    g_lo, g_hi = ranges.girders_per_span
    gw_lo = ranges.girder_width[0]
    g_cap = min(g_hi, int(np.floor(deck_width / (gw_lo + MIN_CLEAR_GAP))))
    if g_cap < g_lo:
        raise ConfigurationError(
            f"deck width {deck_width:.2f} m cannot hold {g_lo} girders with clear gap")
    girders = integer(g_lo, g_cap)
    gw_hi = min(ranges.girder_width[1], deck_width / girders - MIN_CLEAR_GAP)
    girder_width = float(rng.uniform(gw_lo, gw_hi))

    cap_length = CAP_LENGTH_RATIO * deck_width
    p_lo, p_hi = ranges.pier_count_per_bent
    ps_lo = ranges.pier_size[0]
    p_cap = min(p_hi, int(np.floor(cap_length / (ps_lo + MIN_CLEAR_GAP))))
    if p_cap < p_lo:
        raise ConfigurationError(
            f"pier cap length {cap_length:.2f} m cannot hold {p_lo} piers with clear gap")
    piers = integer(p_lo, p_cap)
    ps_hi = min(ranges.pier_size[1], cap_length / piers - MIN_CLEAR_GAP)
    pier_size = float(rng.uniform(ps_lo, ps_hi))

    girder_section = str(ranges.girder_sections[integer(0, len(ranges.girder_sections) - 1)])
    pier_section = str(ranges.pier_sections[integer(0, len(ranges.pier_sections) - 1)])

    return BridgeSpec(
        seed=seed,
        span_lengths=span_lengths,
        deck_width=deck_width,
        girders_per_span=girders,
        girder_section=girder_section,
        girder_depth=uniform("girder_depth"),
        girder_width=girder_width,
        pier_count_per_bent=piers,
        pier_section=pier_section,
        pier_size=pier_size,
        pier_height=uniform("pier_height"),
        pier_cap_depth=uniform("pier_cap_depth"),
        pier_cap_width=uniform("pier_cap_width"),
        slab_thickness=uniform("slab_thickness"),
        barrier_height=uniform("barrier_height"),
        barrier_width=uniform("barrier_width"),
    )


# ---------------------------------------------------------------- primitives

def _fan(n):
    return [(0, i, i + 1) for i in range(1, n - 1)]


def extrude_profile(profile, cap_triangles, origin, u_axis, v_axis, length):
    """Sweep a CCW 2D profile along ``u_axis x v_axis`` into a closed prism.

    ``cap_triangles`` triangulates the profile (CCW, indices into ``profile``).
    Returns ``(vertices, triangles)`` with outward-facing winding.
    """
    profile = np.asarray(profile, dtype=float)
    u_axis = np.asarray(u_axis, float)
    v_axis = np.asarray(v_axis, float)
    w_axis = np.cross(u_axis, v_axis)
    n = len(profile)
    ring = np.asarray(origin, float) + profile[:, :1] * u_axis + profile[:, 1:2] * v_axis
    vertices = np.vstack([ring, ring + length * w_axis])
    tris = []
    for i in range(n):
        j = (i + 1) % n
        tris.append((i, j, n + j))
        tris.append((i, n + j, n + i))
    for a, b, c in cap_triangles:
        tris.append((a, c, b))
        tris.append((n + a, n + b, n + c))
    return vertices, np.asarray(tris, dtype=np.int64)


def box_mesh(lo, hi):
    """Closed axis-aligned box between corners ``lo`` and ``hi``."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    dx, dy, _ = hi - lo
    profile = [(0, 0), (dx, 0), (dx, dy), (0, dy)]
    return extrude_profile(profile, _fan(4), lo, (1, 0, 0), (0, 1, 0), hi[2] - lo[2])


def hollow_box_mesh(lo, hi, wall):
    """Closed box with a concentric cavity; the cavity faces point inward."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    if np.any(hi - lo <= 2 * wall):
        raise ValueError("wall thickness leaves no cavity")
    v_out, t_out = box_mesh(lo, hi)
    v_in, t_in = box_mesh(lo + wall, hi - wall)
    return np.vstack([v_out, v_in]), np.vstack([t_out, t_in[:, ::-1] + len(v_out)])


def icosphere(radius=1.0, subdivisions=4, center=(0.0, 0.0, 0.0)):
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.asarray(v, float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    vertices = np.asarray(verts) * radius + np.asarray(center, float)
    return vertices, np.asarray(faces, dtype=np.int64)


def _i_section(depth, width):
    """CCW I-girder profile centred on u = 0 with its soffit at v = 0."""
    bf, tf = width, 0.75 * width
    tb, tt = 0.15 * depth, 0.12 * depth
    tw = 0.35 * tf
    pts = [(-bf / 2, 0), (bf / 2, 0), (bf / 2, tb), (tw / 2, tb),
           (tw / 2, depth - tt), (tf / 2, depth - tt), (tf / 2, depth), (-tf / 2, depth),
           (-tf / 2, depth - tt), (-tw / 2, depth - tt), (-tw / 2, tb), (-bf / 2, tb)]
    tris = [(0, 1, 2), (0, 2, 3), (0, 3, 10), (0, 10, 11),
            (10, 3, 4), (10, 4, 9),
            (6, 7, 8), (6, 8, 9), (6, 9, 4), (6, 4, 5)]
    return pts, tris


def _rect_section(width, depth):
    return [(-width / 2, 0), (width / 2, 0), (width / 2, depth), (-width / 2, depth)], _fan(4)


def _barrier_section(width, height):
    hb, hm, ht = width / 2, 0.45 * width, 0.2 * width
    pts = [(-hb, 0), (hb, 0), (hb, 0.1 * height), (hm, 0.4 * height), (ht, height),
           (-ht, height), (-hm, 0.4 * height), (-hb, 0.1 * height)]
    return pts, _fan(len(pts))


def _circle_section(diameter, segments=CIRCLE_SEGMENTS):
    ang = 2 * np.pi * np.arange(segments) / segments
    pts = np.column_stack([np.cos(ang), np.sin(ang)]) * diameter / 2
    return pts, _fan(segments)


# ------------------------------------------------------------ bridge builder

def support_positions(spec):
    """x coordinates of the pier caps (one per interior support, or both ends)."""
    edges = np.concatenate([[0.0], np.cumsum(spec.span_lengths)])
    if spec.span_count == 1:
        return [float(edges[0]), float(edges[1])]
    return [float(x) for x in edges[1:-1]]


def build_bridge_meshes(spec):
    """Build every component mesh of ``spec``.

    Instance ids are assigned in the order slab, barriers, girders (span by
    span), pier caps, piers.
    """
    g = spec.contact_gap
    W = spec.deck_width
    L = spec.length
    cap_bottom = spec.pier_height + g
    girder_bottom = cap_bottom + spec.pier_cap_depth + g
    slab_bottom = girder_bottom + spec.girder_depth + g
    slab_top = slab_bottom + spec.slab_thickness
    barrier_bottom = slab_top + g

    meshes = []

    def add(verts_tris, cls):
        v, t = verts_tris
        meshes.append(ComponentMesh(v, t, cls, len(meshes)))

    add(box_mesh((0.0, -W / 2, slab_bottom), (L, W / 2, slab_top)), SemanticClass.SLAB)

    profile, tris = _barrier_section(spec.barrier_width, spec.barrier_height)
    for side in (-1, 1):
        y = side * (W / 2 - spec.barrier_width / 2)
        add(extrude_profile(profile, tris, (0.0, y, barrier_bottom), (0, 1, 0), (0, 0, 1), L),
            SemanticClass.BARRIER)

    if spec.girder_section == "i_girder":
        profile, tris = _i_section(spec.girder_depth, spec.girder_width)
    else:
        profile, tris = _rect_section(spec.girder_width, spec.girder_depth)
    edges = np.concatenate([[0.0], np.cumsum(spec.span_lengths)])
    spacing = W / spec.girders_per_span
    half_joint = spec.span_joint / 2
    for s in range(spec.span_count):
        x0, x1 = edges[s] + half_joint, edges[s + 1] - half_joint
        for k in range(spec.girders_per_span):
            y = -W / 2 + spacing * (k + 0.5)
            add(extrude_profile(profile, tris, (x0, y, girder_bottom), (0, 1, 0), (0, 0, 1),
                                x1 - x0), SemanticClass.GIRDER)

    cap_len = spec.pier_cap_length
    caps = support_positions(spec)
    for x in caps:
        add(box_mesh((x - spec.pier_cap_width / 2, -cap_len / 2, cap_bottom),
                     (x + spec.pier_cap_width / 2, cap_len / 2, cap_bottom + spec.pier_cap_depth)),
            SemanticClass.PIER_CAP)

    if spec.pier_section == "circular":
        profile, tris = _circle_section(spec.pier_size)
    else:
        profile, tris = _rect_section(spec.pier_size, spec.pier_size)
        profile = [(u, v - spec.pier_size / 2) for u, v in profile]
    pier_spacing = cap_len / spec.pier_count_per_bent
    for x in caps:
        for k in range(spec.pier_count_per_bent):
            y = -cap_len / 2 + pier_spacing * (k + 0.5)
            add(extrude_profile(profile, tris, (x, y, 0.0), (1, 0, 0), (0, 1, 0), spec.pier_height),
                SemanticClass.PIER)
    return meshes


def expected_instance_counts(spec):
    """Number of instances of each semantic class that :func:`build_bridge_meshes` emits."""
    caps = spec.pier_cap_count
    return {
        SemanticClass.SLAB: 1,
        SemanticClass.BARRIER: 2,
        SemanticClass.GIRDER: spec.span_count * spec.girders_per_span,
        SemanticClass.PIER_CAP: caps,
        SemanticClass.PIER: caps * spec.pier_count_per_bent,
    }


def bridge_bbox(meshes):
    if not meshes:
        raise ValueError("bridge_bbox needs at least one mesh")
    return AABB.from_points(np.vstack([m.vertices for m in meshes]))


def write_obj(meshes, path):
    """Write meshes as ASCII OBJ, one ``o <class>_<instance>`` object each."""
    lines = []
    offset = 1
    for m in meshes:
        lines.append(f"o {m.name}")
        lines.extend(f"v {x:.6f} {y:.6f} {z:.6f}" for x, y, z in m.vertices)
        lines.extend(f"f {a + offset} {b + offset} {c + offset}" for a, b, c in m.triangles)
        offset += len(m.vertices)
    Path(path).write_text("\n".join(lines) + "\n")
