"""Pinhole camera ray generation.

Raster position (px + jx, py + jy) maps to the symmetric screen window
[-1, 1) x (-1, 1]: u grows to the right, v grows upward (raster rows run
top to bottom).  Both integrators and the Python wrapper call the same
jitted routine, so primary rays agree bitwise everywhere.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .types import T_MIN, Ray


@njit(cache=True, nogil=True)
def camera_ray_raw(width, height, px, py, jx, jy,
                   cx, cy, cz, rx, ry, rz, ux, uy, uz, fx, fy, fz, tan_half):
    aspect = width / height
    u = (2.0 * (px + jx) - width) / width
    v = (height - 2.0 * (py + jy)) / height
    su = u * tan_half * aspect
    sv = v * tan_half
    dx = fx + su * rx + sv * ux
    dy = fy + su * ry + sv * uy
    dz = fz + su * rz + sv * uz
    inv = 1.0 / np.sqrt(dx * dx + dy * dy + dz * dz)
    return cx, cy, cz, dx * inv, dy * inv, dz * inv


def camera_ray(camera, px, py, jitter) -> Ray:
    """Primary ray through pixel (px, py) at sub-pixel offset `jitter`.

    `jitter` is a PixelJitter or any (jx, jy) pair in [0, 1).
    """
    if not (0 <= px < camera.width and 0 <= py < camera.height):
        raise ValueError("pixel outside camera resolution")
    try:
        jx, jy = jitter.jx, jitter.jy
    except AttributeError:
        jx, jy = jitter
    fwd, right, up = camera.basis()
    c = camera.position
    ox, oy, oz, dx, dy, dz = camera_ray_raw(
        float(camera.width), float(camera.height),
        float(px), float(py), float(jx), float(jy),
        c[0], c[1], c[2], right[0], right[1], right[2],
        up[0], up[1], up[2], fwd[0], fwd[1], fwd[2], camera.tan_half_vfov,
    )
    return Ray(np.array([ox, oy, oz]), np.array([dx, dy, dz]),
               t_min=T_MIN, t_max=np.inf)
