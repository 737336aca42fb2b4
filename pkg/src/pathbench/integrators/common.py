"""Shared per-path kernel logic for both integrator architectures.

Both integrators run exactly the same jitted slot functions over the same
structure-of-arrays path state; the megakernel chains them depth-first per
pixel while the wavefront scheduler runs each stage breadth-first over an
active index list.  Every random draw is keyed by
(seed, pixel, sample, bounce, dimension), so the order in which slots are
visited cannot change any result — equality between the two architectures
is structural rather than a tuning outcome.

Slot-function contract: a slot is touched only by the stage that owns the
current bounce, dead slots are left stale (and guarded at entry), and all
writes land at the slot's own index.  That makes every stage safe to
partition across threads at arbitrary range boundaries.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np
from numba import njit

from ..sampler import (
    DIM_BSDF_U1,
    DIM_BSDF_U2,
    DIM_LIGHT_PICK,
    DIM_LIGHT_U1,
    DIM_LIGHT_U2,
    DIM_RR,
    pixel_jitter_raw,
    uniform_raw,
)
from ..scene.bsdf import DELTA_PDF, bsdf_eval_local, bsdf_sample_local
from ..scene.camera import camera_ray_raw
from ..scene.light import sample_light_raw
from ..scene.traverse import (
    STACK_DEPTH,
    intersect_raw,
    occluded_raw,
    onb_from_normal,
    surface_geometry_raw,
)
from ..scene.types import T_MIN

# Russian-roulette survival probability floor.
RR_P_MIN = 0.05
# Shadow rays stop just short of the light sample to dodge self-hits.
SHADOW_TMAX_SCALE = 1.0 - 1e-3


class PathBuffers(NamedTuple):
    """Structure-of-arrays path state; one slot per in-flight path."""

    # Current ray.
    ox: np.ndarray
    oy: np.ndarray
    oz: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    dz: np.ndarray
    # Hit record written by the intersect stage.
    hit: np.ndarray    # u1
    t: np.ndarray
    inst: np.ndarray   # i8
    prim: np.ndarray   # i8
    b1: np.ndarray
    b2: np.ndarray
    # Path integration state.
    tpx: np.ndarray
    tpy: np.ndarray
    tpz: np.ndarray
    rx: np.ndarray
    ry: np.ndarray
    rz: np.ndarray
    alive: np.ndarray  # u1
    spec: np.ndarray   # u1: emission stays collectible (camera/delta chain)
    depth: np.ndarray  # i8: bounce of the last shade this path entered
    pixel: np.ndarray  # i8
    sample: np.ndarray  # i8
    # Next-event-estimation shadow candidate recorded by shade.
    shv: np.ndarray    # u1: candidate valid
    shox: np.ndarray
    shoy: np.ndarray
    shoz: np.ndarray
    shdx: np.ndarray
    shdy: np.ndarray
    shdz: np.ndarray
    shtmax: np.ndarray
    shcx: np.ndarray
    shcy: np.ndarray
    shcz: np.ndarray


def alloc_buffers(n: int) -> PathBuffers:
    f8 = lambda: np.zeros(n, dtype=np.float64)
    i8 = lambda: np.zeros(n, dtype=np.int64)
    u1 = lambda: np.zeros(n, dtype=np.uint8)
    return PathBuffers(
        ox=f8(), oy=f8(), oz=f8(), dx=f8(), dy=f8(), dz=f8(),
        hit=u1(), t=f8(), inst=i8(), prim=i8(), b1=f8(), b2=f8(),
        tpx=f8(), tpy=f8(), tpz=f8(), rx=f8(), ry=f8(), rz=f8(),
        alive=u1(), spec=u1(), depth=i8(), pixel=i8(), sample=i8(),
        shv=u1(), shox=f8(), shoy=f8(), shoz=f8(),
        shdx=f8(), shdy=f8(), shdz=f8(), shtmax=f8(),
        shcx=f8(), shcy=f8(), shcz=f8(),
    )


def alloc_stacks():
    return (np.empty(STACK_DEPTH, dtype=np.int64),
            np.empty(STACK_DEPTH, dtype=np.int64))


@njit(cache=True, nogil=True)
def raygen_slot(fs, pb, i, pixel, sample_index, seed, width, height):
    """Initialize slot i with the primary ray for `pixel`."""
    px = pixel % width
    py = pixel // width
    jx, jy = pixel_jitter_raw(seed, pixel, sample_index)
    ox, oy, oz, dx, dy, dz = camera_ray_raw(
        float(width), float(height), float(px), float(py), jx, jy,
        fs.cam_pos[0], fs.cam_pos[1], fs.cam_pos[2],
        fs.cam_right[0], fs.cam_right[1], fs.cam_right[2],
        fs.cam_up[0], fs.cam_up[1], fs.cam_up[2],
        fs.cam_fwd[0], fs.cam_fwd[1], fs.cam_fwd[2],
        fs.cam_tan[0],
    )
    pb.ox[i] = ox
    pb.oy[i] = oy
    pb.oz[i] = oz
    pb.dx[i] = dx
    pb.dy[i] = dy
    pb.dz[i] = dz
    pb.tpx[i] = 1.0
    pb.tpy[i] = 1.0
    pb.tpz[i] = 1.0
    pb.rx[i] = 0.0
    pb.ry[i] = 0.0
    pb.rz[i] = 0.0
    pb.alive[i] = 1
    pb.spec[i] = 1  # camera vertex: emission is always collectible
    pb.depth[i] = 0
    pb.pixel[i] = pixel
    pb.sample[i] = sample_index
    pb.shv[i] = 0


@njit(cache=True, nogil=True)
def intersect_slot(fs, pb, i, stack_t, stack_b):
    if pb.alive[i] == 0:
        return
    hit, t, inst, prim, b1, b2 = intersect_raw(
        fs, pb.ox[i], pb.oy[i], pb.oz[i], pb.dx[i], pb.dy[i], pb.dz[i],
        T_MIN, np.inf, stack_t, stack_b,
    )
    pb.hit[i] = 1 if hit else 0
    pb.t[i] = t
    pb.inst[i] = inst
    pb.prim[i] = prim
    pb.b1[i] = b1
    pb.b2[i] = b2


@njit(cache=True, nogil=True)
def shade_slot(fs, pb, i, bounce, seed, max_depth, nee, rr_start):
    """One bounce of the path-integration loop body at slot i.

    Adds emission/environment, records the NEE shadow candidate, samples
    the BSDF, updates throughput, and applies Russian roulette.  Radiance
    is touched only here and in resolve_shadow_slot, in that per-path
    order in both integrators.
    """
    if pb.alive[i] == 0:
        return
    pb.depth[i] = bounce
    pb.shv[i] = 0
    pixel = pb.pixel[i]
    sample = pb.sample[i]

    if pb.hit[i] == 0:
        # Escaped: pick up the environment and finish.
        pb.rx[i] += pb.tpx[i] * fs.env[0]
        pb.ry[i] += pb.tpy[i] * fs.env[1]
        pb.rz[i] += pb.tpz[i] * fs.env[2]
        pb.alive[i] = 0
        return

    inst = pb.inst[i]
    mat = fs.inst_mat[inst]
    wx, wy, wz, nsx, nsy, nsz, ngx, ngy, ngz, _u, _v = surface_geometry_raw(
        fs, inst, pb.prim[i], pb.b1[i], pb.b2[i]
    )

    # Emission, front face only.  With NEE the light-sampling stage owns
    # this contribution except where it cannot: the camera vertex and
    # vertices reached through delta bounces.
    ex = fs.mat_emit[mat, 0]
    ey = fs.mat_emit[mat, 1]
    ez = fs.mat_emit[mat, 2]
    if ex > 0.0 or ey > 0.0 or ez > 0.0:
        front = (pb.dx[i] * ngx + pb.dy[i] * ngy + pb.dz[i] * ngz) < 0.0
        if front and (nee == 0 or pb.spec[i] == 1):
            pb.rx[i] += pb.tpx[i] * ex
            pb.ry[i] += pb.tpy[i] * ey
            pb.rz[i] += pb.tpz[i] * ez

    tx, ty, tz, bx, by, bz = onb_from_normal(nsx, nsy, nsz)
    # wo: unit direction back toward the previous vertex, local frame.
    wox = -(pb.dx[i] * tx + pb.dy[i] * ty + pb.dz[i] * tz)
    woy = -(pb.dx[i] * bx + pb.dy[i] * by + pb.dz[i] * bz)
    woz = -(pb.dx[i] * nsx + pb.dy[i] * nsy + pb.dz[i] * nsz)

    br = fs.mat_base[mat, 0]
    bg = fs.mat_base[mat, 1]
    bb = fs.mat_base[mat, 2]
    rough = fs.mat_rough[mat]
    metal = fs.mat_metal[mat]

    if nee == 1 and fs.light_v0.shape[0] > 0:
        u_pick = uniform_raw(seed, pixel, sample, bounce, DIM_LIGHT_PICK)
        ul1 = uniform_raw(seed, pixel, sample, bounce, DIM_LIGHT_U1)
        ul2 = uniform_raw(seed, pixel, sample, bounce, DIM_LIGHT_U2)
        ldx, ldy, ldz, dist, lr, lg, lb, lpdf = sample_light_raw(
            fs, wx, wy, wz, u_pick, ul1, ul2
        )
        if lpdf > 0.0:
            wix = ldx * tx + ldy * ty + ldz * tz
            wiy = ldx * bx + ldy * by + ldz * bz
            wiz = ldx * nsx + ldy * nsy + ldz * nsz
            fr, fg, fb, _bp = bsdf_eval_local(
                br, bg, bb, rough, metal, wox, woy, woz, wix, wiy, wiz
            )
            if fr > 0.0 or fg > 0.0 or fb > 0.0:
                scale = wiz / lpdf
                pb.shv[i] = 1
                pb.shox[i] = wx
                pb.shoy[i] = wy
                pb.shoz[i] = wz
                pb.shdx[i] = ldx
                pb.shdy[i] = ldy
                pb.shdz[i] = ldz
                pb.shtmax[i] = dist * SHADOW_TMAX_SCALE
                pb.shcx[i] = pb.tpx[i] * fr * lr * scale
                pb.shcy[i] = pb.tpy[i] * fg * lg * scale
                pb.shcz[i] = pb.tpz[i] * fb * lb * scale

    if bounce == max_depth - 1:
        pb.alive[i] = 0
        return

    u1 = uniform_raw(seed, pixel, sample, bounce, DIM_BSDF_U1)
    u2 = uniform_raw(seed, pixel, sample, bounce, DIM_BSDF_U2)
    wix, wiy, wiz, fr, fg, fb, pdf, _delta = bsdf_sample_local(
        br, bg, bb, rough, metal, wox, woy, woz, u1, u2
    )
    if pdf == DELTA_PDF:
        # Delta lobe: f already carries the full throughput weight.
        pb.tpx[i] *= fr
        pb.tpy[i] *= fg
        pb.tpz[i] *= fb
        pb.spec[i] = 1
    elif pdf > 0.0:
        w = wiz / pdf
        pb.tpx[i] *= fr * w
        pb.tpy[i] *= fg * w
        pb.tpz[i] *= fb * w
        pb.spec[i] = 0
    else:
        pb.alive[i] = 0
        return

    pb.ox[i] = wx
    pb.oy[i] = wy
    pb.oz[i] = wz
    pb.dx[i] = wix * tx + wiy * bx + wiz * nsx
    pb.dy[i] = wix * ty + wiy * by + wiz * nsy
    pb.dz[i] = wix * tz + wiy * bz + wiz * nsz

    if bounce + 1 >= rr_start:
        p = pb.tpx[i]
        if pb.tpy[i] > p:
            p = pb.tpy[i]
        if pb.tpz[i] > p:
            p = pb.tpz[i]
        if p > 1.0:
            p = 1.0
        elif p < RR_P_MIN:
            p = RR_P_MIN
        u = uniform_raw(seed, pixel, sample, bounce, DIM_RR)
        if u >= p:
            pb.alive[i] = 0
            return
        inv = 1.0 / p
        pb.tpx[i] *= inv
        pb.tpy[i] *= inv
        pb.tpz[i] *= inv


@njit(cache=True, nogil=True)
def resolve_shadow_slot(fs, pb, i, stack_t, stack_b):
    """Resolve slot i's NEE candidate; runs for every path shaded this
    bounce (a path may die in shade yet still owe its light sample)."""
    if pb.shv[i] == 0:
        return
    pb.shv[i] = 0
    if occluded_raw(
        fs, pb.shox[i], pb.shoy[i], pb.shoz[i],
        pb.shdx[i], pb.shdy[i], pb.shdz[i],
        T_MIN, pb.shtmax[i], stack_t, stack_b,
    ):
        return
    pb.rx[i] += pb.shcx[i]
    pb.ry[i] += pb.shcy[i]
    pb.rz[i] += pb.shcz[i]


@njit(cache=True, nogil=True)
def clamp_radiance_range(pb, lo, hi):
    """Zero non-finite radiance in [lo, hi); returns how many paths were
    clamped.  Runs at path end in both integrators."""
    clamped = 0
    for i in range(lo, hi):
        r = pb.rx[i]
        g = pb.ry[i]
        b = pb.rz[i]
        if np.isfinite(r) and np.isfinite(g) and np.isfinite(b):
            continue
        pb.rx[i] = 0.0
        pb.ry[i] = 0.0
        pb.rz[i] = 0.0
        clamped += 1
    return clamped


def split_ranges(n: int, workers: int):
    """Contiguous [lo, hi) ranges covering 0..n; at most `workers` parts."""
    parts = max(1, min(workers, n)) if n else 1
    bounds = [k * n // parts for k in range(parts + 1)]
    return [(bounds[k], bounds[k + 1]) for k in range(parts)
            if bounds[k + 1] > bounds[k]]


def run_partitioned(pool: ThreadPoolExecutor | None, fn, n: int, workers: int):
    """Run fn(lo, hi) over a contiguous partition of [0, n).

    Returns the list of per-range results in range order (deterministic
    regardless of completion order).  With one worker or no pool, runs
    inline.
    """
    ranges = split_ranges(n, workers)
    if pool is None or len(ranges) == 1:
        return [fn(lo, hi) for lo, hi in ranges]
    futures = [pool.submit(fn, lo, hi) for lo, hi in ranges]
    return [f.result() for f in futures]
