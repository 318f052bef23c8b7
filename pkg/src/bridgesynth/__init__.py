"""Synthetic reinforced-concrete bridge point clouds for instance segmentation.

Procedural bridge meshes, mesh and simulated-LiDAR sampling, sparsity-based
occlusion and other augmentations, matching losses, and AP evaluation.
"""
__version__ = "0.1.0"

import os as _os

import numba as _numba

# TBB from the system is often too old for numba and only produces a warning.
if "NUMBA_THREADING_LAYER" not in _os.environ:
    _numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
