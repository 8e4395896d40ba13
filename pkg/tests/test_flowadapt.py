import math

import numpy as np
import pytest

from flowcodec.flowadapt import (
    block_mean,
    block_vector_median,
    downsample_flow,
    expand_block_field,
)
from flowcodec.model import MotionVector, quantize_to_quarter_pel

from synth import constant_flow, random_flow


# --- oracles -------------------------------------------------------------------

def ref_mean(vectors):
    n = len(vectors)
    return (math.fsum(u for u, _ in vectors) / n, math.fsum(v for _, v in vectors) / n)


def ref_vector_median(vectors, norm="l2"):
    """O(K^2) minimizer of summed distances with the documented tie-break."""
    best = None
    for ui, vi in vectors:
        if norm == "l2":
            total = math.fsum(math.sqrt((ui - uj) ** 2 + (vi - vj) ** 2) for uj, vj in vectors)
        else:
            total = math.fsum(abs(ui - uj) + abs(vi - vj) for uj, vj in vectors)
        key = (total, ui * ui + vi * vi, ui, vi)
        if best is None or key < best[0]:
            best = (key, (ui, vi))
    return best[1]


def field_of(vectors, width=None):
    """Pack a vector list into a 1 x K (or h x w) field."""
    arr = np.array(vectors, np.float64)
    if width is None:
        return arr.reshape(1, -1, 2)
    return arr.reshape(-1, width, 2)


# --- block mean ------------------------------------------------------------------

def test_mean_of_identical_vectors():
    field = constant_flow(8, 8, 2.0, -1.0)
    assert block_mean(field, (0, 0, 8, 8)) == MotionVector(8, -4)


def test_mean_midpoint():
    field = field_of([(1, 1), (3, 3)])
    assert block_mean(field, (0, 0, 2, 1)) == MotionVector(8, 8)


def test_mean_matches_reference_summation():
    rng = np.random.default_rng(1)
    field = random_flow(48, 48, rng)
    for _ in range(30):
        x0, y0 = int(rng.integers(0, 33)), int(rng.integers(0, 33))
        rect = (x0, y0, 16, 16)
        vectors = [tuple(map(float, field[y, x]))
                   for y in range(y0, y0 + 16) for x in range(x0, x0 + 16)]
        want_u, want_v = ref_mean(vectors)
        assert block_mean(field, rect) == quantize_to_quarter_pel(want_u, want_v)


def test_mean_empty_intersection_raises():
    field = constant_flow(8, 8, 0, 0)
    with pytest.raises(ValueError):
        block_mean(field, (8, 0, 4, 4))


# --- vector median ----------------------------------------------------------------

def test_median_of_identical_vectors():
    field = constant_flow(4, 4, -3.5, 0.25)
    assert block_vector_median(field, (0, 0, 4, 4)) == MotionVector(-14, 1)


def test_median_outlier_case():
    vectors = [(0.0, 0.0), (0.0, 0.0), (10.0, 10.0)]
    # distance sums: (0,0) -> ~14.14, (10,10) -> ~28.28
    assert ref_vector_median(vectors) == (0.0, 0.0)
    field = field_of(vectors)
    assert block_vector_median(field, (0, 0, 3, 1)) == MotionVector(0, 0)


def test_median_is_member_of_input_set():
    rng = np.random.default_rng(2)
    for _ in range(50):
        k = int(rng.integers(1, 30))
        vectors = [tuple(map(float, v)) for v in rng.normal(0, 4, (k, 2))]
        field = field_of(vectors)
        mv = block_vector_median(field, (0, 0, k, 1))
        u, v = ref_vector_median(vectors)
        assert mv == quantize_to_quarter_pel(u, v)
        assert (u, v) in vectors


def test_median_matches_bruteforce_including_ties():
    rng = np.random.default_rng(3)
    for trial in range(300):
        k = int(rng.integers(1, 65))
        if trial % 3 == 0:
            # integer coordinates plus duplicates: plenty of exact ties
            vecs = rng.integers(-4, 5, (k, 2)).astype(np.float64)
        elif trial % 3 == 1:
            vecs = rng.normal(0, 6, (k, 2))
            vecs[: k // 2] = vecs[k // 2 : 2 * (k // 2)]  # mirrored duplicates
        else:
            vecs = rng.normal(0, 6, (k, 2))
        vectors = [tuple(map(float, v)) for v in vecs]
        field = field_of(vectors)
        got = block_vector_median(field, (0, 0, k, 1))
        assert got == quantize_to_quarter_pel(*ref_vector_median(vectors))


def test_median_symmetric_tie_breaks_lexicographic():
    vectors = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]
    field = field_of(vectors)
    got = block_vector_median(field, (0, 0, 4, 1))
    assert got == quantize_to_quarter_pel(*ref_vector_median(vectors))
    assert got == MotionVector(-4, 0)  # equal sums and magnitudes; smallest (u, v)


def test_median_l1_variant():
    # L1 and L2 medians diverge on this set.
    vectors = [(0.0, 0.0), (4.0, 0.1), (4.0, -0.1), (2.0, 3.0), (2.0, -3.0)]
    field = field_of(vectors)
    l2 = block_vector_median(field, (0, 0, 5, 1), norm="l2")
    l1 = block_vector_median(field, (0, 0, 5, 1), norm="l1")
    assert l2 == quantize_to_quarter_pel(*ref_vector_median(vectors, "l2"))
    assert l1 == quantize_to_quarter_pel(*ref_vector_median(vectors, "l1"))
    with pytest.raises(ValueError):
        block_vector_median(field, (0, 0, 5, 1), norm="linf")


# --- shared estimator properties -----------------------------------------------

def test_estimators_agree_on_constant_field():
    field = constant_flow(16, 16, 1.75, -2.25)
    for rect in [(0, 0, 16, 16), (8, 8, 8, 8), (12, 12, 8, 8)]:
        assert block_mean(field, rect) == block_vector_median(field, rect) == MotionVector(7, -9)


def test_estimators_permutation_invariant():
    rng = np.random.default_rng(4)
    vecs = rng.normal(0, 5, (24, 2))
    perm = rng.permutation(24)
    a, b = field_of([tuple(v) for v in vecs]), field_of([tuple(v) for v in vecs[perm]])
    assert block_mean(a, (0, 0, 24, 1)) == block_mean(b, (0, 0, 24, 1))
    assert block_vector_median(a, (0, 0, 24, 1)) == block_vector_median(b, (0, 0, 24, 1))


def test_estimators_commute_with_translation():
    rng = np.random.default_rng(5)
    vecs = rng.integers(-8, 9, (16, 2)).astype(np.float64)
    t = (3.0, -2.0)
    base = field_of([tuple(v) for v in vecs])
    shifted = base + np.array(t)
    rect = (0, 0, 16, 1)
    m0, m1 = block_vector_median(base, rect), block_vector_median(shifted, rect)
    assert (m1.dx - m0.dx, m1.dy - m0.dy) == (12, -8)  # exact for integer input
    a0, a1 = block_mean(base, rect), block_mean(shifted, rect)
    assert abs(a1.dx - a0.dx - 12) <= 1 and abs(a1.dy - a0.dy + 8) <= 1


# --- downsample_flow ---------------------------------------------------------------

def test_downsample_constant_field():
    field = constant_flow(32, 32, -1.5, 0.5)
    for method in ("mean", "vector-median"):
        blocks = downsample_flow(field, 16, method)
        assert (blocks.rows, blocks.cols) == (2, 2)
        assert np.all(blocks.vectors[..., 0] == -6)
        assert np.all(blocks.vectors[..., 1] == 2)


def test_downsample_composes_per_block_estimates():
    rng = np.random.default_rng(6)
    field = random_flow(32, 32, rng)
    for method, op in (("mean", block_mean), ("vector-median", block_vector_median)):
        blocks = downsample_flow(field, 16, method)
        for r in range(2):
            for c in range(2):
                want = op(field, (c * 16, r * 16, 16, 16))
                assert blocks.vector(c, r) == want


def test_downsample_edge_blocks_use_partial_sets():
    rng = np.random.default_rng(7)
    field = random_flow(20, 12, rng)  # 2 x 1 grid of 16 px blocks
    blocks = downsample_flow(field, 16, "mean")
    assert (blocks.rows, blocks.cols) == (1, 2)
    assert blocks.vector(1, 0) == block_mean(field, (16, 0, 16, 16))


def test_downsample_bimodal_block_mean_vs_median_differ():
    field = np.zeros((32, 32, 2), np.float32)
    field[:, 8:16, 0] = 8.0  # right half of block (0,0) moves, left half static
    mean_blocks = downsample_flow(field, 16, "mean")
    med_blocks = downsample_flow(field, 16, "vector-median")
    assert mean_blocks.vector(0, 0) == MotionVector(16, 0)   # interior value (4, 0) px
    assert med_blocks.vector(0, 0) == MotionVector(0, 0)     # an input vector
    # odd-count bimodal set: median returns a member, mean does not
    odd = field_of([(0.0, 0.0), (0.0, 0.0), (8.0, 0.0)])
    assert block_vector_median(odd, (0, 0, 3, 1)) == MotionVector(0, 0)
    assert block_mean(odd, (0, 0, 3, 1)) == MotionVector(11, 0)  # 8/3 px


def test_downsample_validates_inputs():
    with pytest.raises(ValueError):
        downsample_flow(np.zeros((4, 4), np.float32), 16)
    with pytest.raises(ValueError):
        downsample_flow(constant_flow(8, 8, 0, 0), 16, method="mode")


def test_expand_block_field_paints_blocks():
    field = constant_flow(32, 32, 2.0, 0.0)
    blocks = downsample_flow(field, 16, "mean")
    dense = expand_block_field(blocks, 32, 32)
    assert dense.shape == (32, 32, 2)
    assert np.all(dense[..., 0] == 2.0) and np.all(dense[..., 1] == 0.0)
