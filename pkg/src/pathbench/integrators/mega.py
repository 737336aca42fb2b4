"""Megakernel integrator: one logical worker traces one pixel sample
from camera ray to termination in a single loop.

The loop body is the shared slot functions, so a pixel's arithmetic is
bit-for-bit the sequence the wavefront scheduler produces for the same
slot — only the interleaving across pixels differs.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

from ..metrics import OCC_GROUP, StageStats, resident_groups
from .common import (
    alloc_buffers,
    alloc_stacks,
    clamp_radiance_range,
    intersect_slot,
    raygen_slot,
    resolve_shadow_slot,
    run_partitioned,
    shade_slot,
)


@njit(cache=True, nogil=True)
def path_loop_slot(fs, pb, i, pixel, sample_index, seed, width, height,
                   max_depth, nee, rr_start, stack_t, stack_b):
    """Trace slot i's full path: the wavefront stage sequence, inlined
    depth-first."""
    raygen_slot(fs, pb, i, pixel, sample_index, seed, width, height)
    for bounce in range(max_depth):
        if pb.alive[i] == 0:
            break
        intersect_slot(fs, pb, i, stack_t, stack_b)
        shade_slot(fs, pb, i, bounce, seed, max_depth, nee, rr_start)
        if nee == 1:
            resolve_shadow_slot(fs, pb, i, stack_t, stack_b)


@njit(cache=True, nogil=True)
def _mega_range(fs, pb, lo, hi, sample_index, seed, width, height,
                max_depth, nee, rr_start, stack_t, stack_b):
    for pixel in range(lo, hi):
        path_loop_slot(fs, pb, pixel, pixel, sample_index, seed,
                       width, height, max_depth, nee, rr_start,
                       stack_t, stack_b)


def trace_path(scene, px, py, sample_index, config):
    """One radiance sample for pixel (px, py); returns linear RGB."""
    pb = alloc_buffers(1)
    stack_t, stack_b = alloc_stacks()
    path_loop_slot(scene.flat, pb, 0, py * config.width + px,
                   sample_index, config.seed, config.width, config.height,
                   config.max_depth, int(config.nee), config.rr_start,
                   stack_t, stack_b)
    clamp_radiance_range(pb, 0, 1)
    return np.array([pb.rx[0], pb.ry[0], pb.rz[0]])


def render_frame_mega(scene, film, config, sample_index):
    """Add one sample per pixel, depth-first; returns StageStats with a
    modeled virtual-warp occupancy derived from termination depths."""
    if (film.width, film.height) != (config.width, config.height):
        raise ValueError("film resolution does not match config")
    fs = scene.flat
    n = config.pixel_count
    pb = alloc_buffers(n)
    nee = int(config.nee)

    def trace_range(lo, hi):
        stack_t, stack_b = alloc_stacks()
        _mega_range(fs, pb, lo, hi, sample_index, config.seed,
                    config.width, config.height, config.max_depth,
                    nee, config.rr_start, stack_t, stack_b)

    pool = (ThreadPoolExecutor(config.workers)
            if config.workers > 1 else None)
    t0 = time.perf_counter_ns()
    try:
        run_partitioned(pool, trace_range, n, config.workers)
        trace_ns = time.perf_counter_ns() - t0
        t1 = time.perf_counter_ns()
        clamped = sum(run_partitioned(
            pool, lambda lo, hi: clamp_radiance_range(pb, lo, hi),
            n, config.workers))
        film.add_sample_frame(np.stack((pb.rx, pb.ry, pb.rz), axis=1))
        accumulate_ns = time.perf_counter_ns() - t1
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    total_ns = time.perf_counter_ns() - t0

    # Virtual-warp model: pixel-order lane groups of OCC_GROUP; a lane is
    # active at bounce b if its path reached depth b, and a group stays
    # resident until its longest path ends.
    active_pre, active_post, dispatched, occ = [], [], [], []
    for b in range(config.max_depth):
        mask = pb.depth >= b
        pre = int(mask.sum())
        lanes = OCC_GROUP * resident_groups(mask) if pre else 0
        active_pre.append(pre)
        active_post.append(int((pb.depth >= b + 1).sum()))
        dispatched.append(lanes)
        occ.append(pre / lanes if lanes else 0.0)

    return StageStats(
        integrator="mega",
        total_ns=total_ns,
        stage_ns={"trace": trace_ns, "accumulate": accumulate_ns},
        active_pre=active_pre,
        active_post=active_post,
        dispatched=dispatched,
        occupancy=occ,
        clamped=clamped,
    )
