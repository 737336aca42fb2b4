"""Binary BVH construction over axis-aligned primitive bounds.

Binned surface-area heuristic with 16 bins on the widest centroid axis.
Nodes split until at most 4 primitives remain; when binning degenerates
(all centroids in one bin) or the tree gets suspiciously deep, a median
split on the sorted centroid order forces progress, which also bounds
traversal stack depth.  Construction is single-threaded and fully
deterministic for identical input bounds.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np

BIN_COUNT = 16
LEAF_MAX = 4
# Past this depth every split is a median split, so depth is bounded by
# FORCE_MEDIAN_DEPTH + log2(n), comfortably inside the traversal stacks.
FORCE_MEDIAN_DEPTH = 28


@dataclass
class BVH:
    node_lo: np.ndarray  # (N, 3) f8
    node_hi: np.ndarray  # (N, 3) f8
    node_a: np.ndarray  # (N,) i8: left child, or prim-range start for leaves
    node_b: np.ndarray  # (N,) i8: right child, -1 for leaves
    node_count: np.ndarray  # (N,) i8: 0 for inner nodes, leaf size otherwise
    prim_ids: np.ndarray  # (P,) i8: permutation of input primitive ids

    @property
    def node_count_total(self) -> int:
        return len(self.node_a)


def build_bvh(bounds_lo, bounds_hi) -> BVH:
    lo = np.ascontiguousarray(bounds_lo, dtype=np.float64)
    hi = np.ascontiguousarray(bounds_hi, dtype=np.float64)
    if lo.ndim != 2 or lo.shape[1] != 3 or lo.shape != hi.shape:
        raise ValueError("bounds must be matching (N, 3) arrays")
    n = len(lo)
    if n == 0:
        raise ValueError("cannot build a BVH over zero primitives")
    if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
        raise ValueError("primitive bounds must be finite")

    centroids = (lo + hi) * 0.5
    order = np.arange(n, dtype=np.int64)
    nodes_lo, nodes_hi = [], []
    nodes_a, nodes_b, nodes_count = [], [], []

    def emit(start, end, depth):
        seg = order[start:end]
        node_id = len(nodes_a)
        nodes_lo.append(lo[seg].min(axis=0))
        nodes_hi.append(hi[seg].max(axis=0))
        nodes_a.append(0)
        nodes_b.append(-1)
        nodes_count.append(0)

        count = end - start
        if count <= LEAF_MAX:
            nodes_a[node_id] = start
            nodes_count[node_id] = count
            return node_id

        mid = _split(seg, centroids, lo, hi, depth)
        order[start:end] = seg  # _split reorders its view's contents
        nodes_a[node_id] = emit(start, start + mid, depth + 1)
        nodes_b[node_id] = emit(start + mid, end, depth + 1)
        return node_id

    # Recursion depth tracks tree depth, which the median fallback bounds.
    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 10000))
    try:
        emit(0, n, 0)
    finally:
        sys.setrecursionlimit(old_limit)

    return BVH(
        node_lo=np.array(nodes_lo),
        node_hi=np.array(nodes_hi),
        node_a=np.array(nodes_a, dtype=np.int64),
        node_b=np.array(nodes_b, dtype=np.int64),
        node_count=np.array(nodes_count, dtype=np.int64),
        prim_ids=order,
    )


def _split(seg, centroids, lo, hi, depth):
    """Reorder `seg` in place into [left | right]; returns left size ≥ 1."""
    c = centroids[seg]
    extent = c.max(axis=0) - c.min(axis=0)
    axis = int(np.argmax(extent))
    if extent[axis] <= 0.0 or depth >= FORCE_MEDIAN_DEPTH:
        return _median_split(seg, c[:, axis])

    cmin = c[:, axis].min()
    scale = BIN_COUNT / extent[axis]
    bins = np.minimum(
        ((c[:, axis] - cmin) * scale).astype(np.int64), BIN_COUNT - 1
    )

    # Per-bin count and bounds, then prefix/suffix sweeps for SAH.
    counts = np.bincount(bins, minlength=BIN_COUNT)
    bin_lo = np.full((BIN_COUNT, 3), np.inf)
    bin_hi = np.full((BIN_COUNT, 3), -np.inf)
    for b in range(BIN_COUNT):
        mask = bins == b
        if counts[b]:
            bin_lo[b] = lo[seg[mask]].min(axis=0)
            bin_hi[b] = hi[seg[mask]].max(axis=0)

    left_n = np.cumsum(counts)[:-1]
    right_n = len(seg) - left_n
    left_area = _sweep_areas(bin_lo, bin_hi)
    right_area = _sweep_areas(bin_lo[::-1], bin_hi[::-1])[::-1]
    cost = left_area * left_n + right_area * right_n

    valid = (left_n > 0) & (right_n > 0)
    if not valid.any():
        return _median_split(seg, c[:, axis])
    cost[~valid] = np.inf
    plane = int(np.argmin(cost))

    go_left = bins <= plane
    reordered = np.concatenate([seg[go_left], seg[~go_left]])
    seg[:] = reordered
    return int(np.count_nonzero(go_left))


def _sweep_areas(bin_lo, bin_hi):
    """Surface area of the running union over the first k bins, k = 1..15."""
    lo = np.minimum.accumulate(bin_lo, axis=0)[:-1]
    hi = np.maximum.accumulate(bin_hi, axis=0)[:-1]
    d = np.maximum(hi - lo, 0.0)
    d[~np.isfinite(d)] = 0.0  # empty prefix: no bins seen yet
    return 2.0 * (d[:, 0] * d[:, 1] + d[:, 1] * d[:, 2] + d[:, 2] * d[:, 0])


def _median_split(seg, keys):
    order = np.argsort(keys, kind="stable")
    seg[:] = seg[order]
    return len(seg) // 2
