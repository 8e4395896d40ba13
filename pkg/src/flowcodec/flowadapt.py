"""Dense flow to block vectors: the Mean and Vector Median block estimators.

The vector median picks the member of the block's flow-vector set whose
summed distance to all other members is smallest; the mean averages the
set. Both results snap to the quarter-pel grid.
"""
from __future__ import annotations

import math

import numpy as np

from .model import (
    DEFAULT_MV_BOUND,
    BlockMotionField,
    FlowField,
    MotionVector,
    block_grid,
    quantize_to_quarter_pel,
)

METHODS = ("mean", "vector-median")

Rect = tuple[int, int, int, int]  # x0, y0, width, height


def _block_vectors(field: FlowField, rect: Rect) -> np.ndarray:
    x0, y0, bw, bh = rect
    h, w = field.shape[:2]
    xa, xb = max(x0, 0), min(x0 + bw, w)
    ya, yb = max(y0, 0), min(y0 + bh, h)
    if xa >= xb or ya >= yb:
        raise ValueError(f"block {rect} does not intersect the {w}x{h} field")
    return field[ya:yb, xa:xb].reshape(-1, 2).astype(np.float64)


def block_mean(field: FlowField, rect: Rect,
               bound: int = DEFAULT_MV_BOUND) -> MotionVector:
    """Arithmetic mean of the flow vectors inside the block."""
    vecs = _block_vectors(field, rect)
    u = math.fsum(vecs[:, 0]) / len(vecs)
    v = math.fsum(vecs[:, 1]) / len(vecs)
    return quantize_to_quarter_pel(u, v, bound)


def block_vector_median(field: FlowField, rect: Rect,
                        bound: int = DEFAULT_MV_BOUND,
                        norm: str = "l2") -> MotionVector:
    """Member of the block's vector set with the least summed distance.

    Distance is Euclidean by default ("l2"); "l1" selects the Manhattan
    variant. Ties break toward the smaller magnitude, then lexicographically
    on (u, v). Per-candidate sums use exact float summation so equal-by-
    symmetry candidates tie exactly.
    """
    vecs = _block_vectors(field, rect)
    du = vecs[:, 0:1] - vecs[:, 0]
    dv = vecs[:, 1:2] - vecs[:, 1]
    if norm == "l2":
        dist = np.sqrt(du * du + dv * dv)
    elif norm == "l1":
        dist = np.abs(du) + np.abs(dv)
    else:
        raise ValueError(f"unknown norm {norm!r}, expected 'l2' or 'l1'")
    best = None
    for i in range(len(vecs)):
        u, v = float(vecs[i, 0]), float(vecs[i, 1])
        key = (math.fsum(dist[i]), u * u + v * v, u, v)
        if best is None or key < best[0]:
            best = (key, u, v)
    return quantize_to_quarter_pel(best[1], best[2], bound)


def downsample_flow(field: FlowField, block_size: int, method: str = "vector-median",
                    bound: int = DEFAULT_MV_BOUND, norm: str = "l2") -> BlockMotionField:
    """Estimate one quarter-pel vector per block of the covering grid.

    Edge blocks use only the in-bounds vectors.
    """
    field = np.asarray(field)
    if field.ndim != 3 or field.shape[2] != 2:
        raise ValueError(f"flow field must have shape (h, w, 2), got {field.shape}")
    if method == "median":
        method = "vector-median"
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    h, w = field.shape[:2]
    cols, rows = block_grid(w, h, block_size)
    vectors = np.zeros((rows, cols, 2), np.int32)
    for r in range(rows):
        for c in range(cols):
            rect = (c * block_size, r * block_size, block_size, block_size)
            if method == "mean":
                mv = block_mean(field, rect, bound)
            else:
                mv = block_vector_median(field, rect, bound, norm)
            vectors[r, c] = (mv.dx, mv.dy)
    return BlockMotionField(block_size, vectors)


def expand_block_field(field: BlockMotionField, width: int, height: int) -> FlowField:
    """Paint each block vector back over its block as a dense (u, v) field."""
    bs = field.block_size
    dense = np.zeros((height, width, 2), np.float32)
    for r in range(field.rows):
        for c in range(field.cols):
            mv = field.vector(c, r)
            dense[r * bs : (r + 1) * bs, c * bs : (c + 1) * bs, 0] = mv.dx / 4.0
            dense[r * bs : (r + 1) * bs, c * bs : (c + 1) * bs, 1] = mv.dy / 4.0
    return dense
