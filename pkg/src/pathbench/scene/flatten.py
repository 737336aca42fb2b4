"""Packing a validated Scene into the kernel-side FlatScene.

Concatenates mesh pools, builds one BVH per mesh over object-space
triangle bounds and a top-level BVH over instance world bounds, inverts
instance transforms, and tabulates emissive triangles in world space.
"""

from __future__ import annotations

import numpy as np

from .bvh import build_bvh
from .types import FlatScene, SceneError

_Z = np.zeros(0, dtype=np.int64)


class _EmptyTree:
    """Zero-node stand-in so an instance-free scene still flattens;
    traversal never enters an empty top-level tree."""

    node_lo = np.zeros((0, 3))
    node_hi = np.zeros((0, 3))
    node_a = _Z
    node_b = _Z
    node_count = _Z
    prim_ids = _Z


def flatten_scene(scene) -> FlatScene:
    meshes, instances, materials = scene.meshes, scene.instances, scene.materials

    z3 = np.zeros((0, 3))
    vertices = np.concatenate([m.vertices for m in meshes] or [z3])
    normals = np.concatenate([m.normals for m in meshes] or [z3])
    uvs = np.concatenate([m.uvs for m in meshes] or [np.zeros((0, 2))])
    vtx_offset = np.cumsum([0] + [len(m.vertices) for m in meshes])
    tris = np.concatenate(
        [m.indices + vtx_offset[i] for i, m in enumerate(meshes)]
        or [np.zeros((0, 3))]
    ).astype(np.int64)
    tri_counts = [m.triangle_count for m in meshes]
    mesh_tri_start = np.cumsum([0] + tri_counts)[:-1].astype(np.int64)

    # Per-mesh BVHs, concatenated with child/prim ids rebased to the pools.
    blas_lo, blas_hi = [], []
    blas_a, blas_b, blas_count = [], [], []
    blas_prims, blas_root = [], []
    mesh_root_lo = np.zeros((len(meshes), 3))
    mesh_root_hi = np.zeros((len(meshes), 3))
    node_base = 0
    for i, mesh in enumerate(meshes):
        if mesh.triangle_count == 0:
            blas_root.append(-1)  # unreachable: instanced meshes are nonempty
            continue
        t = tris[mesh_tri_start[i]: mesh_tri_start[i] + tri_counts[i]]
        corners = vertices[t]  # (T, 3, 3)
        tree = build_bvh(corners.min(axis=1), corners.max(axis=1))
        prim_base = sum(p.size for p in blas_prims)
        inner = tree.node_count == 0
        a = tree.node_a.copy()
        a[inner] += node_base
        a[~inner] += prim_base
        b = tree.node_b.copy()
        b[inner] += node_base
        blas_lo.append(tree.node_lo)
        blas_hi.append(tree.node_hi)
        blas_a.append(a)
        blas_b.append(b)
        blas_count.append(tree.node_count)
        blas_prims.append(tree.prim_ids + mesh_tri_start[i])
        blas_root.append(node_base)
        mesh_root_lo[i] = tree.node_lo[0]
        mesh_root_hi[i] = tree.node_hi[0]
        node_base += tree.node_count_total

    # Instance transforms: object->world, its inverse, inverse-transpose.
    n_inst = len(instances)
    o2w = np.empty((n_inst, 3, 4))
    w2o = np.empty((n_inst, 3, 4))
    nmat = np.empty((n_inst, 3, 3))
    inst_lo = np.empty((n_inst, 3))
    inst_hi = np.empty((n_inst, 3))
    for i, inst in enumerate(instances):
        m = inst.transform
        try:
            inv = np.linalg.inv(m)
        except np.linalg.LinAlgError:
            raise SceneError("instance transform is not invertible") from None
        o2w[i] = m[:3]
        w2o[i] = inv[:3]
        nmat[i] = inv[:3, :3].T
        # World bounds from the 8 transformed BLAS-root corners.
        corners = _box_corners(mesh_root_lo[inst.mesh], mesh_root_hi[inst.mesh])
        world = corners @ m[:3, :3].T + m[:3, 3]
        inst_lo[i] = world.min(axis=0)
        inst_hi[i] = world.max(axis=0)

    if n_inst:
        tlas = build_bvh(inst_lo, inst_hi)
    else:
        tlas = _EmptyTree()

    mat_base = np.array([m.base_color for m in materials],
                        dtype=np.float64).reshape(len(materials), 3)
    mat_rough = np.array([m.roughness for m in materials], dtype=np.float64)
    mat_metal = np.array([m.metallic for m in materials], dtype=np.float64)
    mat_emit = np.array([m.emission for m in materials],
                        dtype=np.float64).reshape(len(materials), 3)

    lights = _light_table(scene, tris, mesh_tri_start, tri_counts, vertices,
                          o2w, nmat)

    cam = scene.camera
    fwd, right, up = cam.basis()

    return FlatScene(
        vertices=np.ascontiguousarray(vertices),
        normals=np.ascontiguousarray(normals),
        uvs=np.ascontiguousarray(uvs),
        tris=np.ascontiguousarray(tris),
        mesh_tri_start=mesh_tri_start,
        blas_lo=np.ascontiguousarray(np.concatenate(blas_lo or [z3])),
        blas_hi=np.ascontiguousarray(np.concatenate(blas_hi or [z3])),
        blas_a=np.concatenate(blas_a or [_Z]),
        blas_b=np.concatenate(blas_b or [_Z]),
        blas_count=np.concatenate(blas_count or [_Z]),
        blas_prims=np.concatenate(blas_prims or [_Z]),
        blas_root=np.array(blas_root, dtype=np.int64),
        inst_mesh=np.array([i.mesh for i in instances], dtype=np.int64),
        inst_mat=np.array([i.material for i in instances], dtype=np.int64),
        w2o=np.ascontiguousarray(w2o),
        o2w=np.ascontiguousarray(o2w),
        nmat=np.ascontiguousarray(nmat),
        tlas_lo=np.ascontiguousarray(tlas.node_lo),
        tlas_hi=np.ascontiguousarray(tlas.node_hi),
        tlas_a=tlas.node_a,
        tlas_b=tlas.node_b,
        tlas_count=tlas.node_count,
        tlas_prims=tlas.prim_ids,
        mat_base=mat_base,
        mat_rough=mat_rough,
        mat_metal=mat_metal,
        mat_emit=mat_emit,
        light_v0=lights[0],
        light_v1=lights[1],
        light_v2=lights[2],
        light_n=lights[3],
        light_emit=lights[4],
        light_area=lights[5],
        env=np.ascontiguousarray(scene.env_radiance, dtype=np.float64),
        cam_pos=np.ascontiguousarray(cam.position, dtype=np.float64),
        cam_right=np.ascontiguousarray(right),
        cam_up=np.ascontiguousarray(up),
        cam_fwd=np.ascontiguousarray(fwd),
        cam_tan=np.array([cam.tan_half_vfov]),
    )


def _box_corners(lo, hi):
    xs = (lo[0], hi[0])
    ys = (lo[1], hi[1])
    zs = (lo[2], hi[2])
    return np.array([(x, y, z) for x in xs for y in ys for z in zs])


def _light_table(scene, tris, mesh_tri_start, tri_counts, vertices, o2w, nmat):
    v0s, v1s, v2s, ns, emits, areas = [], [], [], [], [], []
    for inst_id, inst in enumerate(scene.instances):
        mat = scene.materials[inst.material]
        if not mat.is_emissive:
            continue
        start = mesh_tri_start[inst.mesh]
        for g in range(start, start + tri_counts[inst.mesh]):
            i0, i1, i2 = tris[g]
            obj = np.stack([vertices[i0], vertices[i1], vertices[i2]])
            world = obj @ o2w[inst_id, :, :3].T + o2w[inst_id, :, 3]
            # Geometric normal via the inverse-transpose, matching hits.
            obj_n = np.cross(obj[1] - obj[0], obj[2] - obj[0])
            n = nmat[inst_id] @ obj_n
            length = np.linalg.norm(n)
            area = 0.5 * np.linalg.norm(
                np.cross(world[1] - world[0], world[2] - world[0])
            )
            if length < 1e-20 or area < 1e-20:
                continue  # degenerate sliver carries no power
            v0s.append(world[0])
            v1s.append(world[1])
            v2s.append(world[2])
            ns.append(n / length)
            emits.append(np.asarray(mat.emission, dtype=np.float64))
            areas.append(area)

    if v0s:
        return (np.array(v0s), np.array(v1s), np.array(v2s), np.array(ns),
                np.array(emits), np.array(areas))
    z3 = np.zeros((0, 3))
    return z3, z3.copy(), z3.copy(), z3.copy(), z3.copy(), np.zeros(0)
