from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WHITE = (255, 255, 255)


@dataclass(eq=False)
class LabeledPointCloud:
    """Ordered points with RGB color and semantic / instance labels.

    Arrays are parallel: ``positions`` (N, 3) float64, ``colors`` (N, 3) uint8,
    ``semantic`` and ``instance`` (N,) int64. Duplicated points are allowed.
    """

    positions: np.ndarray
    colors: np.ndarray
    semantic: np.ndarray
    instance: np.ndarray

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        n = len(self.positions)
        colors = np.asarray(self.colors)
        if colors.size and (colors.min() < 0 or colors.max() > 255):
            raise ValueError("color channels must lie in [0, 255]")
        self.colors = np.ascontiguousarray(colors, dtype=np.uint8).reshape(-1, 3)
        self.semantic = np.ascontiguousarray(self.semantic, dtype=np.int64).reshape(-1)
        self.instance = np.ascontiguousarray(self.instance, dtype=np.int64).reshape(-1)
        if not (len(self.colors) == len(self.semantic) == len(self.instance) == n):
            raise ValueError("point attribute arrays have mismatched lengths")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("point coordinates must be finite")
        if n and (self.instance.min() < 0 or self.semantic.min() < 0):
            raise ValueError("labels must be non-negative")

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0), np.zeros(0))

    @classmethod
    def from_labels(cls, positions, semantic, instance, color=WHITE):
        positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        n = len(positions)
        colors = np.broadcast_to(np.asarray(color, dtype=np.uint8), (n, 3))
        return cls(positions, colors,
                   np.broadcast_to(np.asarray(semantic, dtype=np.int64), (n,)),
                   np.broadcast_to(np.asarray(instance, dtype=np.int64), (n,)))

    @classmethod
    def concatenate(cls, clouds):
        clouds = list(clouds)
        if not clouds:
            return cls.empty()
        return cls(np.concatenate([c.positions for c in clouds]),
                   np.concatenate([c.colors for c in clouds]),
                   np.concatenate([c.semantic for c in clouds]),
                   np.concatenate([c.instance for c in clouds]))

    def __len__(self):
        return len(self.positions)

    def subset(self, index):
        """Points selected by a boolean mask or integer index array (order kept)."""
        return LabeledPointCloud(self.positions[index], self.colors[index],
                                 self.semantic[index], self.instance[index])

    def with_positions(self, positions):
        return LabeledPointCloud(positions, self.colors.copy(), self.semantic.copy(),
                                 self.instance.copy())

    def with_colors(self, colors):
        return LabeledPointCloud(self.positions.copy(), colors, self.semantic.copy(),
                                 self.instance.copy())

    def copy(self):
        return self.subset(slice(None))

    def equals(self, other):
        return (len(self) == len(other)
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.colors, other.colors)
                and np.array_equal(self.semantic, other.semantic)
                and np.array_equal(self.instance, other.instance))

    def label_pairs(self):
        """Sorted (semantic, instance) rows, a multiset view of the labels."""
        pairs = np.column_stack([self.semantic, self.instance])
        if not len(pairs):
            return pairs
        return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
