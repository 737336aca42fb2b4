"""Two-level BVH traversal: instance-level walk, per-mesh walk, triangle test.

Rays are transformed into object space with the direction left
unnormalized so the hit parameter t means the same thing in both spaces.
The triangle test is double-precision Moller-Trumbore accepting both
orientations; exact-t ties go to the lowest (instance_id, primitive_id)
so results never depend on traversal order.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .types import HitRecord, SurfaceGeometry

# Traversal scratch depth; the builder's forced-median fallback keeps tree
# depth well under this.
STACK_DEPTH = 64
# Rejection threshold for the Moller-Trumbore determinant.
DET_EPS = 1e-12


@njit(cache=True, nogil=True)
def _box_hit(lox, loy, loz, hix, hiy, hiz, ox, oy, oz, dx, dy, dz, t_near, t_far):
    """Slab test over the closed interval [t_near, t_far]; never culls a
    plane-exact hit (zero direction components handled by containment)."""
    if dx != 0.0:
        inv = 1.0 / dx
        t0 = (lox - ox) * inv
        t1 = (hix - ox) * inv
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > t_near:
            t_near = t0
        if t1 < t_far:
            t_far = t1
    elif ox < lox or ox > hix:
        return False
    if dy != 0.0:
        inv = 1.0 / dy
        t0 = (loy - oy) * inv
        t1 = (hiy - oy) * inv
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > t_near:
            t_near = t0
        if t1 < t_far:
            t_far = t1
    elif oy < loy or oy > hiy:
        return False
    if dz != 0.0:
        inv = 1.0 / dz
        t0 = (loz - oz) * inv
        t1 = (hiz - oz) * inv
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > t_near:
            t_near = t0
        if t1 < t_far:
            t_far = t1
    elif oz < loz or oz > hiz:
        return False
    return t_near <= t_far


@njit(cache=True, nogil=True)
def _tri_hit(fs, g, ox, oy, oz, dx, dy, dz):
    """Moller-Trumbore against pool triangle g; returns (t, b1, b2) with
    t = inf on miss.  Two-sided; near-parallel rays are misses."""
    i0 = fs.tris[g, 0]
    i1 = fs.tris[g, 1]
    i2 = fs.tris[g, 2]
    v0x = fs.vertices[i0, 0]
    v0y = fs.vertices[i0, 1]
    v0z = fs.vertices[i0, 2]
    e1x = fs.vertices[i1, 0] - v0x
    e1y = fs.vertices[i1, 1] - v0y
    e1z = fs.vertices[i1, 2] - v0z
    e2x = fs.vertices[i2, 0] - v0x
    e2y = fs.vertices[i2, 1] - v0y
    e2z = fs.vertices[i2, 2] - v0z

    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if -DET_EPS < det < DET_EPS:
        return np.inf, 0.0, 0.0
    inv = 1.0 / det
    tx = ox - v0x
    ty = oy - v0y
    tz = oz - v0z
    b1 = (tx * px + ty * py + tz * pz) * inv
    if b1 < 0.0 or b1 > 1.0:
        return np.inf, 0.0, 0.0
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    b2 = (dx * qx + dy * qy + dz * qz) * inv
    if b2 < 0.0 or b1 + b2 > 1.0:
        return np.inf, 0.0, 0.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    return t, b1, b2


@njit(cache=True, nogil=True)
def intersect_raw(fs, ox, oy, oz, dx, dy, dz, t_min, t_max, stack_t, stack_b):
    """Nearest hit in the open interval (t_min, t_max).

    Returns (hit_flag, t, instance_id, primitive_id, b1, b2) with the
    primitive id local to the instance's mesh.
    """
    best_t = np.inf
    best_inst = np.int64(-1)
    best_prim = np.int64(-1)
    best_b1 = 0.0
    best_b2 = 0.0
    if fs.tlas_count.shape[0] == 0:  # instance-free scene
        return False, np.inf, np.int64(-1), np.int64(-1), 0.0, 0.0

    cap = t_max
    tp = 0
    stack_t[tp] = 0
    tp += 1
    while tp > 0:
        tp -= 1
        node = stack_t[tp]
        limit = best_t if best_t < cap else cap
        if not _box_hit(
            fs.tlas_lo[node, 0], fs.tlas_lo[node, 1], fs.tlas_lo[node, 2],
            fs.tlas_hi[node, 0], fs.tlas_hi[node, 1], fs.tlas_hi[node, 2],
            ox, oy, oz, dx, dy, dz, t_min, limit,
        ):
            continue
        if fs.tlas_count[node] == 0:
            stack_t[tp] = fs.tlas_a[node]
            tp += 1
            stack_t[tp] = fs.tlas_b[node]
            tp += 1
            continue

        for k in range(fs.tlas_a[node], fs.tlas_a[node] + fs.tlas_count[node]):
            inst = fs.tlas_prims[k]
            m = fs.inst_mesh[inst]
            w2o = fs.w2o[inst]
            iox = w2o[0, 0] * ox + w2o[0, 1] * oy + w2o[0, 2] * oz + w2o[0, 3]
            ioy = w2o[1, 0] * ox + w2o[1, 1] * oy + w2o[1, 2] * oz + w2o[1, 3]
            ioz = w2o[2, 0] * ox + w2o[2, 1] * oy + w2o[2, 2] * oz + w2o[2, 3]
            idx = w2o[0, 0] * dx + w2o[0, 1] * dy + w2o[0, 2] * dz
            idy = w2o[1, 0] * dx + w2o[1, 1] * dy + w2o[1, 2] * dz
            idz = w2o[2, 0] * dx + w2o[2, 1] * dy + w2o[2, 2] * dz
            tri_start = fs.mesh_tri_start[m]

            bp = 0
            stack_b[bp] = fs.blas_root[m]
            bp += 1
            while bp > 0:
                bp -= 1
                nb = stack_b[bp]
                limit = best_t if best_t < cap else cap
                if not _box_hit(
                    fs.blas_lo[nb, 0], fs.blas_lo[nb, 1], fs.blas_lo[nb, 2],
                    fs.blas_hi[nb, 0], fs.blas_hi[nb, 1], fs.blas_hi[nb, 2],
                    iox, ioy, ioz, idx, idy, idz, t_min, limit,
                ):
                    continue
                if fs.blas_count[nb] == 0:
                    stack_b[bp] = fs.blas_a[nb]
                    bp += 1
                    stack_b[bp] = fs.blas_b[nb]
                    bp += 1
                    continue
                for j in range(fs.blas_a[nb], fs.blas_a[nb] + fs.blas_count[nb]):
                    g = fs.blas_prims[j]
                    t, b1, b2 = _tri_hit(fs, g, iox, ioy, ioz, idx, idy, idz)
                    if t <= t_min or t >= t_max:
                        continue
                    local = g - tri_start
                    if t < best_t:
                        better = True
                    elif t == best_t:
                        better = inst < best_inst or (
                            inst == best_inst and local < best_prim
                        )
                    else:
                        better = False
                    if better:
                        best_t = t
                        best_inst = inst
                        best_prim = local
                        best_b1 = b1
                        best_b2 = b2

    if best_inst < 0:
        return False, np.inf, np.int64(-1), np.int64(-1), 0.0, 0.0
    return True, best_t, best_inst, best_prim, best_b1, best_b2


@njit(cache=True, nogil=True)
def occluded_raw(fs, ox, oy, oz, dx, dy, dz, t_min, t_max, stack_t, stack_b):
    """True iff anything lies in (t_min, t_max); stops at the first hit."""
    if fs.tlas_count.shape[0] == 0:  # instance-free scene
        return False
    tp = 0
    stack_t[tp] = 0
    tp += 1
    while tp > 0:
        tp -= 1
        node = stack_t[tp]
        if not _box_hit(
            fs.tlas_lo[node, 0], fs.tlas_lo[node, 1], fs.tlas_lo[node, 2],
            fs.tlas_hi[node, 0], fs.tlas_hi[node, 1], fs.tlas_hi[node, 2],
            ox, oy, oz, dx, dy, dz, t_min, t_max,
        ):
            continue
        if fs.tlas_count[node] == 0:
            stack_t[tp] = fs.tlas_a[node]
            tp += 1
            stack_t[tp] = fs.tlas_b[node]
            tp += 1
            continue
        for k in range(fs.tlas_a[node], fs.tlas_a[node] + fs.tlas_count[node]):
            inst = fs.tlas_prims[k]
            m = fs.inst_mesh[inst]
            w2o = fs.w2o[inst]
            iox = w2o[0, 0] * ox + w2o[0, 1] * oy + w2o[0, 2] * oz + w2o[0, 3]
            ioy = w2o[1, 0] * ox + w2o[1, 1] * oy + w2o[1, 2] * oz + w2o[1, 3]
            ioz = w2o[2, 0] * ox + w2o[2, 1] * oy + w2o[2, 2] * oz + w2o[2, 3]
            idx = w2o[0, 0] * dx + w2o[0, 1] * dy + w2o[0, 2] * dz
            idy = w2o[1, 0] * dx + w2o[1, 1] * dy + w2o[1, 2] * dz
            idz = w2o[2, 0] * dx + w2o[2, 1] * dy + w2o[2, 2] * dz

            bp = 0
            stack_b[bp] = fs.blas_root[m]
            bp += 1
            while bp > 0:
                bp -= 1
                nb = stack_b[bp]
                if not _box_hit(
                    fs.blas_lo[nb, 0], fs.blas_lo[nb, 1], fs.blas_lo[nb, 2],
                    fs.blas_hi[nb, 0], fs.blas_hi[nb, 1], fs.blas_hi[nb, 2],
                    iox, ioy, ioz, idx, idy, idz, t_min, t_max,
                ):
                    continue
                if fs.blas_count[nb] == 0:
                    stack_b[bp] = fs.blas_a[nb]
                    bp += 1
                    stack_b[bp] = fs.blas_b[nb]
                    bp += 1
                    continue
                for j in range(fs.blas_a[nb], fs.blas_a[nb] + fs.blas_count[nb]):
                    g = fs.blas_prims[j]
                    t, b1, b2 = _tri_hit(fs, g, iox, ioy, ioz, idx, idy, idz)
                    if t_min < t < t_max:
                        return True
    return False


@njit(cache=True, nogil=True)
def onb_from_normal(nx, ny, nz):
    """Orthonormal (tangent, bitangent) for a unit normal; branch at the
    z pole keeps everything well-conditioned."""
    s = 1.0 if nz >= 0.0 else -1.0
    a = -1.0 / (s + nz)
    b = nx * ny * a
    tx = 1.0 + s * nx * nx * a
    ty = s * b
    tz = -s * nx
    bx = b
    by = s + ny * ny * a
    bz = -ny
    return tx, ty, tz, bx, by, bz


@njit(cache=True, nogil=True)
def surface_geometry_raw(fs, inst, prim, b1, b2):
    """World-space shading data for a hit: position, shading and geometric
    normals (inverse-transpose transformed), interpolated uv."""
    m = fs.inst_mesh[inst]
    g = fs.mesh_tri_start[m] + prim
    i0 = fs.tris[g, 0]
    i1 = fs.tris[g, 1]
    i2 = fs.tris[g, 2]
    b0 = 1.0 - b1 - b2

    px = b0 * fs.vertices[i0, 0] + b1 * fs.vertices[i1, 0] + b2 * fs.vertices[i2, 0]
    py = b0 * fs.vertices[i0, 1] + b1 * fs.vertices[i1, 1] + b2 * fs.vertices[i2, 1]
    pz = b0 * fs.vertices[i0, 2] + b1 * fs.vertices[i1, 2] + b2 * fs.vertices[i2, 2]
    o2w = fs.o2w[inst]
    wx = o2w[0, 0] * px + o2w[0, 1] * py + o2w[0, 2] * pz + o2w[0, 3]
    wy = o2w[1, 0] * px + o2w[1, 1] * py + o2w[1, 2] * pz + o2w[1, 3]
    wz = o2w[2, 0] * px + o2w[2, 1] * py + o2w[2, 2] * pz + o2w[2, 3]

    e1x = fs.vertices[i1, 0] - fs.vertices[i0, 0]
    e1y = fs.vertices[i1, 1] - fs.vertices[i0, 1]
    e1z = fs.vertices[i1, 2] - fs.vertices[i0, 2]
    e2x = fs.vertices[i2, 0] - fs.vertices[i0, 0]
    e2y = fs.vertices[i2, 1] - fs.vertices[i0, 1]
    e2z = fs.vertices[i2, 2] - fs.vertices[i0, 2]
    gx = e1y * e2z - e1z * e2y
    gy = e1z * e2x - e1x * e2z
    gz = e1x * e2y - e1y * e2x

    sx = b0 * fs.normals[i0, 0] + b1 * fs.normals[i1, 0] + b2 * fs.normals[i2, 0]
    sy = b0 * fs.normals[i0, 1] + b1 * fs.normals[i1, 1] + b2 * fs.normals[i2, 1]
    sz = b0 * fs.normals[i0, 2] + b1 * fs.normals[i1, 2] + b2 * fs.normals[i2, 2]

    nm = fs.nmat[inst]
    ngx = nm[0, 0] * gx + nm[0, 1] * gy + nm[0, 2] * gz
    ngy = nm[1, 0] * gx + nm[1, 1] * gy + nm[1, 2] * gz
    ngz = nm[2, 0] * gx + nm[2, 1] * gy + nm[2, 2] * gz
    inv = 1.0 / np.sqrt(ngx * ngx + ngy * ngy + ngz * ngz)
    ngx *= inv
    ngy *= inv
    ngz *= inv

    nsx = nm[0, 0] * sx + nm[0, 1] * sy + nm[0, 2] * sz
    nsy = nm[1, 0] * sx + nm[1, 1] * sy + nm[1, 2] * sz
    nsz = nm[2, 0] * sx + nm[2, 1] * sy + nm[2, 2] * sz
    norm = np.sqrt(nsx * nsx + nsy * nsy + nsz * nsz)
    if norm < 1e-12:  # opposing vertex normals cancelled out
        nsx, nsy, nsz = ngx, ngy, ngz
    else:
        inv = 1.0 / norm
        nsx *= inv
        nsy *= inv
        nsz *= inv

    u = b0 * fs.uvs[i0, 0] + b1 * fs.uvs[i1, 0] + b2 * fs.uvs[i2, 0]
    v = b0 * fs.uvs[i0, 1] + b1 * fs.uvs[i1, 1] + b2 * fs.uvs[i2, 1]
    return wx, wy, wz, nsx, nsy, nsz, ngx, ngy, ngz, u, v


def _check_unit(direction):
    n = float(np.linalg.norm(direction))
    if abs(n - 1.0) > 1e-6:
        raise ValueError(f"ray direction must be unit length, |d| = {n}")


def _stacks():
    return (np.empty(STACK_DEPTH, dtype=np.int64),
            np.empty(STACK_DEPTH, dtype=np.int64))


def _flat(scene):
    # Accept a built Scene or a bare FlatScene.
    return getattr(scene, "flat", scene)


def intersect(scene, ray) -> HitRecord:
    """Nearest-hit query; misses come back with hit_flag False."""
    _check_unit(ray.direction)
    st, sb = _stacks()
    o, d = ray.origin, ray.direction
    hit, t, inst, prim, b1, b2 = intersect_raw(
        _flat(scene), o[0], o[1], o[2], d[0], d[1], d[2],
        ray.t_min, ray.t_max, st, sb,
    )
    if not hit:
        return HitRecord(hit_flag=False)
    return HitRecord(hit_flag=True, t=float(t), instance_id=int(inst),
                     primitive_id=int(prim), barycentrics=(float(b1), float(b2)))


def occluded(scene, ray) -> bool:
    _check_unit(ray.direction)
    st, sb = _stacks()
    o, d = ray.origin, ray.direction
    return bool(occluded_raw(
        _flat(scene), o[0], o[1], o[2], d[0], d[1], d[2],
        ray.t_min, ray.t_max, st, sb,
    ))


def surface_geometry(scene, hit: HitRecord) -> SurfaceGeometry:
    if not hit.hit_flag:
        raise ValueError("surface_geometry needs a hit record with hit_flag set")
    fs = _flat(scene)
    if not 0 <= hit.instance_id < len(fs.inst_mesh):
        raise ValueError("hit record instance id out of range")
    mesh = fs.inst_mesh[hit.instance_id]
    start = fs.mesh_tri_start[mesh]
    end = len(fs.tris) if mesh + 1 == len(fs.mesh_tri_start) else fs.mesh_tri_start[mesh + 1]
    if not 0 <= hit.primitive_id < end - start:
        raise ValueError("hit record primitive id out of range")
    b1, b2 = hit.barycentrics
    wx, wy, wz, nsx, nsy, nsz, ngx, ngy, ngz, u, v = surface_geometry_raw(
        fs, hit.instance_id, hit.primitive_id, b1, b2,
    )
    tx, ty, tz, bx, by, bz = onb_from_normal(nsx, nsy, nsz)
    return SurfaceGeometry(
        position=np.array([wx, wy, wz]),
        shading_normal=np.array([nsx, nsy, nsz]),
        geometric_normal=np.array([ngx, ngy, ngz]),
        tangent=np.array([tx, ty, tz]),
        bitangent=np.array([bx, by, bz]),
        uv=np.array([u, v]),
    )
