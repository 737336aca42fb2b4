"""Wavefront integrator: breadth-first staged pipeline over persistent
structure-of-arrays path buffers.

Each bounce runs specialized stages — intersect, shade, shadow, compact,
prepare-indirect — over a dense active index list, with a full join
between stages standing in for pipeline barriers.  The per-slot
arithmetic is the shared slot functions, so output matches the
megakernel bit for bit; only scheduling differs.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..metrics import OCC_GROUP, StageStats, occupancy
from .common import (
    alloc_buffers,
    alloc_stacks,
    clamp_radiance_range,
    intersect_slot,
    raygen_slot,
    resolve_shadow_slot,
    run_partitioned,
    shade_slot,
    split_ranges,
)


@dataclass
class ActiveSet:
    """Dense list of in-flight path indices with a ping-pong count pair:
    slot 0 is the current bounce's active count, slot 1 accumulates the
    next bounce's count during compaction (0 at all other times)."""

    index_list: np.ndarray
    count_pair: np.ndarray  # int64[2]

    @property
    def count(self) -> int:
        return int(self.count_pair[0])


@dataclass
class DispatchArgs:
    """Indirect-dispatch sizing for the next bounce's stages."""

    workgroup_count: int
    group_size: int

    @property
    def item_count(self) -> int:
        return self.workgroup_count * self.group_size


def full_active_set(n: int) -> ActiveSet:
    return ActiveSet(index_list=np.arange(n, dtype=np.int64),
                     count_pair=np.array([n, 0], dtype=np.int64))


@njit(cache=True, nogil=True)
def _raygen_range(fs, pb, lo, hi, sample_index, seed, width, height):
    for pixel in range(lo, hi):
        raygen_slot(fs, pb, pixel, pixel, sample_index, seed, width, height)


@njit(cache=True, nogil=True)
def _intersect_positions(fs, pb, idx, lo, hi, stack_t, stack_b):
    for k in range(lo, hi):
        intersect_slot(fs, pb, idx[k], stack_t, stack_b)


@njit(cache=True, nogil=True)
def _shade_positions(fs, pb, idx, lo, hi, bounce, seed, max_depth, nee,
                     rr_start):
    for k in range(lo, hi):
        shade_slot(fs, pb, idx[k], bounce, seed, max_depth, nee, rr_start)


@njit(cache=True, nogil=True)
def _shadow_positions(fs, pb, idx, lo, hi, stack_t, stack_b):
    for k in range(lo, hi):
        resolve_shadow_slot(fs, pb, idx[k], stack_t, stack_b)


@njit(cache=True, nogil=True)
def _count_alive(pb, src, lo, hi):
    c = 0
    for j in range(lo, hi):
        if pb.alive[src[j]] != 0:
            c += 1
    return c


@njit(cache=True, nogil=True)
def _scatter_alive(pb, src, idx, lo, hi, out_pos):
    k = out_pos
    for j in range(lo, hi):
        i = src[j]
        if pb.alive[i] != 0:
            idx[k] = i
            k += 1


@njit(cache=True, nogil=True)
def _collect_alive(pb, src, lo, hi):
    out = np.empty(hi - lo, dtype=np.int64)
    k = 0
    for j in range(lo, hi):
        i = src[j]
        if pb.alive[i] != 0:
            out[k] = i
            k += 1
    return out[:k]


def stage_raygen(scene, buffers, sample_index, config, pool=None):
    """Primary rays for every pixel; slot i serves pixel i."""
    fs = scene.flat
    run_partitioned(
        pool,
        lambda lo, hi: _raygen_range(fs, buffers, lo, hi, sample_index,
                                     config.seed, config.width,
                                     config.height),
        config.pixel_count, config.workers,
    )


def stage_intersect(scene, buffers, active: ActiveSet, workers: int = 1,
                    pool=None):
    """Hit records for every active path; dead slots stay stale."""
    fs = scene.flat

    def part(lo, hi):
        stack_t, stack_b = alloc_stacks()
        _intersect_positions(fs, buffers, active.index_list, lo, hi,
                             stack_t, stack_b)

    run_partitioned(pool, part, active.count, workers)


def stage_shade(scene, buffers, active: ActiveSet, sample_index, bounce,
                config, pool=None):
    """Megakernel loop body at this bounce for every active path.

    sample_index is carried per path from raygen; the argument is part
    of the stage interface and must match what raygen was given.
    """
    fs = scene.flat
    nee = int(config.nee)

    def part(lo, hi):
        _shade_positions(fs, buffers, active.index_list, lo, hi, bounce,
                         config.seed, config.max_depth, nee,
                         config.rr_start)

    run_partitioned(pool, part, active.count, config.workers)


def stage_shadow(scene, buffers, active: ActiveSet, sample_index, bounce,
                 workers: int = 1, pool=None):
    """Occlusion-test the shade stage's light-sample candidates and add
    the unblocked contributions.  The candidates are self-contained, so
    sample_index/bounce take no further draws here."""
    fs = scene.flat

    def part(lo, hi):
        stack_t, stack_b = alloc_stacks()
        _shadow_positions(fs, buffers, active.index_list, lo, hi,
                          stack_t, stack_b)

    run_partitioned(pool, part, active.count, workers)


def stage_compact(buffers, active: ActiveSet, deterministic: bool = True,
                  workers: int = 1, pool=None) -> ActiveSet:
    """Rebuild the index list's prefix with the alive subset.

    Deterministic mode (default): per-chunk count, exclusive scan,
    ordered scatter — ascending index order regardless of worker count.
    Atomic mode: chunks append to a shared cursor in completion order,
    reproducing nondeterministic queue growth (set-equal only).
    Either way the source indices are snapshotted first, so in-place
    scatter can never overwrite an unread slot; slot 1 of the count
    pair receives the surviving count.
    """
    n = active.count
    idx = active.index_list
    src = idx[:n].copy()
    ranges = split_ranges(n, workers)

    if deterministic:
        counts = run_partitioned(
            pool, lambda lo, hi: _count_alive(buffers, src, lo, hi),
            n, workers)
        offsets = {}
        base = 0
        for (lo, _hi), c in zip(ranges, counts):
            offsets[lo] = base
            base += c
        run_partitioned(
            pool,
            lambda lo, hi: _scatter_alive(buffers, src, idx, lo, hi,
                                          offsets[lo]),
            n, workers)
        active.count_pair[1] = base
    else:
        lock = threading.Lock()

        def append(lo, hi):
            block = _collect_alive(buffers, src, lo, hi)
            with lock:
                base = int(active.count_pair[1])
                active.count_pair[1] = base + block.size
            idx[base:base + block.size] = block

        run_partitioned(pool, append, n, workers)
    return active


def stage_prepare_indirect(active: ActiveSet, group_size: int) -> DispatchArgs:
    """Promote the compacted count: count_pair <- (old slot 1, 0); size
    the next dispatch at ceil(count / group_size) workgroups."""
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    nxt = int(active.count_pair[1])
    active.count_pair[0] = nxt
    active.count_pair[1] = 0
    return DispatchArgs(workgroup_count=-(-nxt // group_size),
                        group_size=group_size)


def stage_accumulate(buffers, film, sample_index):
    """Blend every path's radiance into the film's running average.
    The film tracks its own sample count; sample_index identifies the
    frame for interface symmetry with the other stages."""
    film.add_sample_frame(
        np.stack((buffers.rx, buffers.ry, buffers.rz), axis=1))


def render_frame_wave(scene, film, config, sample_index, compaction=True):
    """Add one sample per pixel, breadth-first; returns StageStats.

    With compaction (default) each bounce dispatches only the compacted
    active list, sized by prepare-indirect.  Without it, every bounce
    dispatches all W*H slots and dead ones are skipped by the per-slot
    alive guard.
    """
    if (film.width, film.height) != (config.width, config.height):
        raise ValueError("film resolution does not match config")
    n = config.pixel_count
    gs = config.group_size
    workers = config.workers
    pb = alloc_buffers(n)
    full_dispatch = -(-n // gs) * gs

    stage_ns = dict.fromkeys(
        ("raygen", "intersect", "shade") + (("shadow",) if config.nee else ())
        + (("compact", "prepare") if compaction else ()) + ("accumulate",), 0)
    max_depth = config.max_depth
    active_pre = [0] * max_depth
    active_post = [0] * max_depth
    dispatched = [0] * max_depth
    occ = [0.0] * max_depth

    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    t0 = time.perf_counter_ns()
    try:
        t = time.perf_counter_ns()
        stage_raygen(scene, pb, sample_index, config, pool=pool)
        stage_ns["raygen"] += time.perf_counter_ns() - t
        active = full_active_set(n)
        dispatch_items = full_dispatch

        for bounce in range(max_depth):
            if compaction:
                pre = active.count
            else:
                pre = n if bounce == 0 else int(np.count_nonzero(pb.alive))
            if pre == 0:
                break
            active_pre[bounce] = pre
            if compaction:
                dispatched[bounce] = dispatch_items
                occ[bounce] = occupancy(np.ones(pre, dtype=bool), OCC_GROUP)
            else:
                dispatched[bounce] = full_dispatch
                occ[bounce] = occupancy(pb.alive != 0, OCC_GROUP)

            t = time.perf_counter_ns()
            stage_intersect(scene, pb, active, workers=workers, pool=pool)
            stage_ns["intersect"] += time.perf_counter_ns() - t
            t = time.perf_counter_ns()
            stage_shade(scene, pb, active, sample_index, bounce, config,
                        pool=pool)
            stage_ns["shade"] += time.perf_counter_ns() - t
            if config.nee:
                t = time.perf_counter_ns()
                stage_shadow(scene, pb, active, sample_index, bounce,
                             workers=workers, pool=pool)
                stage_ns["shadow"] += time.perf_counter_ns() - t

            if bounce < max_depth - 1:
                if compaction:
                    t = time.perf_counter_ns()
                    stage_compact(
                        pb, active,
                        deterministic=config.deterministic_compaction,
                        workers=workers, pool=pool)
                    stage_ns["compact"] += time.perf_counter_ns() - t
                    t = time.perf_counter_ns()
                    dargs = stage_prepare_indirect(active, gs)
                    stage_ns["prepare"] += time.perf_counter_ns() - t
                    dispatch_items = dargs.item_count
                    active_post[bounce] = active.count
                else:
                    active_post[bounce] = int(np.count_nonzero(pb.alive))
            # else: the final shade forced every path dead; post stays 0.

        t = time.perf_counter_ns()
        clamped = sum(run_partitioned(
            pool, lambda lo, hi: clamp_radiance_range(pb, lo, hi),
            n, workers))
        stage_accumulate(pb, film, sample_index)
        stage_ns["accumulate"] += time.perf_counter_ns() - t
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    total_ns = time.perf_counter_ns() - t0

    return StageStats(
        integrator="wave" if compaction else "wave-nocompact",
        total_ns=total_ns,
        stage_ns=stage_ns,
        active_pre=active_pre,
        active_post=active_post,
        dispatched=dispatched,
        occupancy=occ,
        clamped=clamped,
    )
