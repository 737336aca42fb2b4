"""Procedural scenes used by tests and the CLI: "cornell" and "furnace-sphere".

The Cornell box interior is the unit cube: floor y=0, ceiling y=1, back
wall z=1, red wall x=0, green wall x=1, open toward the camera at
negative z.  One quad mesh and one cube mesh cover all eight instances,
which keeps the instancing/TLAS path exercised by every test that
touches the scene.
"""

from __future__ import annotations

import numpy as np

from .types import Camera, Instance, Material, Mesh, Scene


def translate(x, y, z):
    m = np.eye(4)
    m[:3, 3] = (x, y, z)
    return m


def rotate_x(deg):
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    m = np.eye(4)
    m[1, 1], m[1, 2] = c, -s
    m[2, 1], m[2, 2] = s, c
    return m


def rotate_y(deg):
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    m = np.eye(4)
    m[0, 0], m[0, 2] = c, s
    m[2, 0], m[2, 2] = -s, c
    return m


def rotate_z(deg):
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    m = np.eye(4)
    m[0, 0], m[0, 1] = c, -s
    m[1, 0], m[1, 1] = s, c
    return m


def scaled(x, y, z):
    return np.diag((float(x), float(y), float(z), 1.0))


def compose(*ops):
    """Matrix product of the ops; the rightmost applies to the object first."""
    m = np.eye(4)
    for op in ops:
        m = m @ op
    return m


def quad_mesh() -> Mesh:
    """Unit quad spanning x, z in [0, 1] at y = 0, front face +y."""
    vertices = np.array([
        (0.0, 0.0, 0.0),
        (0.0, 0.0, 1.0),
        (1.0, 0.0, 1.0),
        (1.0, 0.0, 0.0),
    ])
    indices = np.array([(0, 1, 2), (0, 2, 3)])
    normals = np.tile((0.0, 1.0, 0.0), (4, 1))
    uvs = np.array([(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)])
    return Mesh(vertices, indices, normals, uvs)


def cube_mesh() -> Mesh:
    """Unit cube [0, 1]^3 with faceted (per-face) normals, faces outward."""
    faces = [
        # (4 CCW-from-outside corners, outward normal)
        (((0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)), (0, -1, 0)),
        (((0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)), (0, 1, 0)),
        (((0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)), (0, 0, -1)),
        (((0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)), (0, 0, 1)),
        (((0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)), (-1, 0, 0)),
        (((1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)), (1, 0, 0)),
    ]
    vertices, normals, uvs, indices = [], [], [], []
    for corners, n in faces:
        base = len(vertices)
        vertices.extend(corners)
        normals.extend([n] * 4)
        uvs.extend([(0, 0), (0, 1), (1, 1), (1, 0)])
        indices.append((base, base + 1, base + 2))
        indices.append((base, base + 2, base + 3))
    return Mesh(np.array(vertices, dtype=np.float64), np.array(indices),
                np.array(normals, dtype=np.float64),
                np.array(uvs, dtype=np.float64))


def sphere_mesh(stacks=48, slices=96) -> Mesh:
    """Unit UV sphere at the origin with exact analytic normals."""
    ii, jj = np.meshgrid(np.arange(stacks + 1), np.arange(slices),
                         indexing="ij")
    theta = np.pi * ii / stacks
    phi = 2.0 * np.pi * jj / slices
    x = np.sin(theta) * np.cos(phi)
    y = np.cos(theta)
    z = np.sin(theta) * np.sin(phi)
    vertices = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    uvs = np.stack([(phi / (2 * np.pi)).ravel(), (theta / np.pi).ravel()],
                   axis=1)

    def vid(i, j):
        return i * slices + (j % slices)

    indices = []
    for i in range(stacks):
        for j in range(slices):
            v00, v01 = vid(i, j), vid(i, j + 1)
            v10, v11 = vid(i + 1, j), vid(i + 1, j + 1)
            if i > 0:
                indices.append((v00, v01, v11))
            if i < stacks - 1:
                indices.append((v00, v11, v10))
    return Mesh(vertices, np.array(indices), vertices.copy(), uvs)


def cornell_box(width=64, height=64) -> Scene:
    materials = [
        Material(base_color=(0.73, 0.73, 0.73)),                      # white
        Material(base_color=(0.63, 0.065, 0.05)),                     # red
        Material(base_color=(0.14, 0.45, 0.091)),                     # green
        Material(base_color=(0.78, 0.78, 0.78),
                 emission=(17.0, 12.0, 4.0)),                         # lamp
    ]
    WHITE, RED, GREEN, LAMP = range(4)
    meshes = [quad_mesh(), cube_mesh()]
    QUAD, CUBE = range(2)
    instances = [
        Instance(QUAD, WHITE, np.eye(4)),                             # floor
        Instance(QUAD, WHITE, compose(translate(1, 1, 0), rotate_z(180))),
        Instance(QUAD, WHITE, compose(translate(0, 0, 1), rotate_x(-90))),
        Instance(QUAD, RED, compose(translate(0, 1, 0), rotate_z(-90))),
        Instance(QUAD, GREEN, compose(translate(1, 0, 0), rotate_z(90))),
        Instance(QUAD, LAMP, compose(translate(0.65, 0.999, 0.35),
                                     rotate_z(180), scaled(0.3, 1, 0.3))),
        Instance(CUBE, WHITE, compose(translate(0.12, 0, 0.45),
                                      rotate_y(17), scaled(0.3, 0.6, 0.3))),
        Instance(CUBE, WHITE, compose(translate(0.55, 0, 0.18),
                                      rotate_y(-17), scaled(0.3, 0.3, 0.3))),
    ]
    camera = Camera(position=(0.5, 0.5, -1.35), look_at=(0.5, 0.5, 0.5),
                    up=(0, 1, 0), vfov_deg=38.0, width=width, height=height)
    return Scene(meshes, materials, instances, camera,
                 env_radiance=np.zeros(3)).build()


def furnace_sphere(width=32, height=32) -> Scene:
    """Convex Lambertian sphere, albedo 0.5, inside a unit white furnace."""
    materials = [Material(base_color=(0.5, 0.5, 0.5), roughness=1.0,
                          metallic=0.0)]
    meshes = [sphere_mesh()]
    instances = [Instance(0, 0, np.eye(4))]
    camera = Camera(position=(0.0, 0.0, -3.0), look_at=(0.0, 0.0, 0.0),
                    up=(0, 1, 0), vfov_deg=18.0, width=width, height=height)
    return Scene(meshes, materials, instances, camera,
                 env_radiance=np.ones(3)).build()


BUILTINS = {"cornell": cornell_box, "furnace-sphere": furnace_sphere}
