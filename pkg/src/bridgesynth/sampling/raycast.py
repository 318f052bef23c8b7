"""Nearest-hit ray casting against triangle soups using a flat BVH."""
from __future__ import annotations

import numba
import numpy as np

HIT_EPS = 1e-9
LEAF_SIZE = 4
STACK_DEPTH = 128


class TriangleBVH:
    """Bounding volume hierarchy over a (T, 3, 3) triangle array.

    Nodes are stored in flat arrays. A node with ``count > 0`` is a leaf that
    covers ``order[start:start + count]``; otherwise its children are
    ``left[node]`` and ``right[node]``.
    """

    def __init__(self, triangles):
        tris = np.ascontiguousarray(triangles, dtype=np.float64).reshape(-1, 3, 3)
        self.triangles = tris
        t_min = tris.min(axis=1)
        t_max = tris.max(axis=1)
        centroids = tris.mean(axis=1)

        lo, hi, left, right, start, count = [], [], [], [], [], []
        order = np.arange(len(tris), dtype=np.int64)

        def new_node():
            lo.append(None); hi.append(None)
            left.append(-1); right.append(-1); start.append(0); count.append(0)
            return len(lo) - 1

        if len(tris):
            root = new_node()
            todo = [(root, 0, len(tris))]
            while todo:
                node, s, e = todo.pop()
                idx = order[s:e]
                lo[node] = t_min[idx].min(axis=0)
                hi[node] = t_max[idx].max(axis=0)
                if e - s <= LEAF_SIZE:
                    start[node], count[node] = s, e - s
                    continue
                c = centroids[idx]
                axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
                mid = (e - s) // 2
                part = np.argsort(c[:, axis], kind="stable")
                order[s:e] = idx[part]
                l_node, r_node = new_node(), new_node()
                left[node], right[node] = l_node, r_node
                todo.append((r_node, s + mid, e))
                todo.append((l_node, s, s + mid))

        self.node_lo = np.asarray(lo, dtype=np.float64).reshape(-1, 3)
        self.node_hi = np.asarray(hi, dtype=np.float64).reshape(-1, 3)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.start = np.asarray(start, dtype=np.int64)
        self.count = np.asarray(count, dtype=np.int64)
        self.order = order
        self.sorted_triangles = np.ascontiguousarray(tris[order])

    def __len__(self):
        return len(self.triangles)

    def intersect(self, origins, directions, t_min=0.0, t_max=np.inf):
        """Nearest hit per ray.

        ``directions`` should be unit length so the returned parameter is the
        range. Returns ``(t, tri)``; rays without a hit in ``[t_min, t_max]``
        get ``t = inf`` and ``tri = -1``.
        """
        origins = np.ascontiguousarray(np.broadcast_to(origins, np.shape(directions)),
                                       dtype=np.float64)
        directions = np.ascontiguousarray(directions, dtype=np.float64)
        n = len(directions)
        t_out = np.full(n, np.inf)
        tri_out = np.full(n, -1, dtype=np.int64)
        if n == 0 or len(self) == 0:
            return t_out, tri_out
        _trace(origins, directions, float(max(t_min, HIT_EPS)), float(t_max),
               self.node_lo, self.node_hi, self.left, self.right, self.start, self.count,
               self.sorted_triangles, t_out, tri_out)
        hit = tri_out >= 0
        tri_out[hit] = self.order[tri_out[hit]]
        return t_out, tri_out


@numba.njit(cache=True, inline="always")
def _moller_trumbore(ox, oy, oz, dx, dy, dz, tri):
    e1x = tri[1, 0] - tri[0, 0]
    e1y = tri[1, 1] - tri[0, 1]
    e1z = tri[1, 2] - tri[0, 2]
    e2x = tri[2, 0] - tri[0, 0]
    e2y = tri[2, 1] - tri[0, 1]
    e2z = tri[2, 2] - tri[0, 2]
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if -HIT_EPS < det < HIT_EPS:
        return np.inf
    inv = 1.0 / det
    sx = ox - tri[0, 0]
    sy = oy - tri[0, 1]
    sz = oz - tri[0, 2]
    u = (sx * px + sy * py + sz * pz) * inv
    if u < -HIT_EPS or u > 1.0 + HIT_EPS:
        return np.inf
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -HIT_EPS or u + v > 1.0 + HIT_EPS:
        return np.inf
    return (e2x * qx + e2y * qy + e2z * qz) * inv


@numba.njit(parallel=True, cache=True)
def _trace(origins, directions, t_lo, t_hi, node_lo, node_hi, left, right, start, count,
           tris, t_out, tri_out):
    for r in numba.prange(len(directions)):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = directions[r, 0], directions[r, 1], directions[r, 2]
        ix = 1.0 / dx if abs(dx) > 1e-15 else 1e15
        iy = 1.0 / dy if abs(dy) > 1e-15 else 1e15
        iz = 1.0 / dz if abs(dz) > 1e-15 else 1e15
        best_t = t_hi
        best = -1
        stack = np.empty(STACK_DEPTH, dtype=np.int64)
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            a = (node_lo[node, 0] - ox) * ix
            b = (node_hi[node, 0] - ox) * ix
            near = min(a, b)
            far = max(a, b)
            a = (node_lo[node, 1] - oy) * iy
            b = (node_hi[node, 1] - oy) * iy
            near = max(near, min(a, b))
            far = min(far, max(a, b))
            a = (node_lo[node, 2] - oz) * iz
            b = (node_hi[node, 2] - oz) * iz
            near = max(near, min(a, b))
            far = min(far, max(a, b))
            # widen slightly so grazing hits on box faces are not culled
            slack = 1e-9 * (1.0 + abs(far))
            if near > far + slack or far < t_lo - slack or near > best_t + slack:
                continue
            c = count[node]
            if c > 0:
                s = start[node]
                for k in range(s, s + c):
                    t = _moller_trumbore(ox, oy, oz, dx, dy, dz, tris[k])
                    if t_lo <= t <= best_t and t < np.inf and (t < best_t or best < 0):
                        best_t = t
                        best = k
            else:
                stack[top] = right[node]
                stack[top + 1] = left[node]
                top += 2
        if best >= 0:
            t_out[r] = best_t
            tri_out[r] = best


def point_triangle_distance(point, triangles):
    """Euclidean distance from ``point`` to each triangle in a (T, 3, 3) array."""
    p = np.asarray(point, dtype=float)
    tris = np.asarray(triangles, dtype=float).reshape(-1, 3, 3)
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    n = np.cross(b - a, c - a)
    nn = np.einsum("ij,ij->i", n, n)
    w = p - a
    # barycentric coordinates of the projection onto the plane
    beta = np.einsum("ij,ij->i", np.cross(w, c - a), n) / nn
    gamma = np.einsum("ij,ij->i", np.cross(b - a, w), n) / nn
    alpha = 1.0 - beta - gamma
    inside = (alpha >= 0) & (beta >= 0) & (gamma >= 0)
    plane = np.abs(np.einsum("ij,ij->i", w, n)) / np.sqrt(nn)

    def seg(s0, s1):
        d = s1 - s0
        t = np.clip(np.einsum("ij,ij->i", p - s0, d) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
        return np.linalg.norm(p - (s0 + t[:, None] * d), axis=1)

    edge = np.minimum(np.minimum(seg(a, b), seg(b, c)), seg(c, a))
    return np.where(inside, plane, edge)
