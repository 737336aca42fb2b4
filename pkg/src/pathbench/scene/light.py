"""Area-light sampling over the scene's emissive-triangle table.

Pick a triangle uniformly, then a uniform point on it (square-root
barycentric warp), and convert the area density to solid angle at the
shading point.  Emission leaves the geometric front face only: a point
behind the light sees zero radiance.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def sample_light_raw(fs, px, py, pz, u_pick, u1, u2):
    """Returns (dir_xyz, distance, radiance_rgb, pdf_solid_angle).

    pdf = 0 marks an unusable sample (degenerate geometry or zero-length
    connection); callers skip those.
    """
    n_lights = fs.light_v0.shape[0]
    pick = int(u_pick * n_lights)
    if pick >= n_lights:       # u_pick == 1 - ulp edge
        pick = n_lights - 1

    su = np.sqrt(u1)
    b0 = 1.0 - su
    b1 = u2 * su
    b2 = 1.0 - b0 - b1
    lx = (b0 * fs.light_v0[pick, 0] + b1 * fs.light_v1[pick, 0]
          + b2 * fs.light_v2[pick, 0])
    ly = (b0 * fs.light_v0[pick, 1] + b1 * fs.light_v1[pick, 1]
          + b2 * fs.light_v2[pick, 1])
    lz = (b0 * fs.light_v0[pick, 2] + b1 * fs.light_v1[pick, 2]
          + b2 * fs.light_v2[pick, 2])

    dx = lx - px
    dy = ly - py
    dz = lz - pz
    dist2 = dx * dx + dy * dy + dz * dz
    if dist2 <= 0.0:
        return 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0
    dist = np.sqrt(dist2)
    dx /= dist
    dy /= dist
    dz /= dist

    # Cosine at the light: positive when the shading point is on the
    # front-face side.
    cos_l = -(dx * fs.light_n[pick, 0] + dy * fs.light_n[pick, 1]
              + dz * fs.light_n[pick, 2])
    if cos_l <= 0.0:
        return dx, dy, dz, dist, 0.0, 0.0, 0.0, 0.0

    pdf = dist2 / (fs.light_area[pick] * cos_l * n_lights)
    return (dx, dy, dz, dist,
            fs.light_emit[pick, 0], fs.light_emit[pick, 1],
            fs.light_emit[pick, 2], pdf)


def sample_light(scene, point, u_pick, u1, u2):
    """Python wrapper: (direction, distance, radiance, pdf)."""
    fs = getattr(scene, "flat", scene)   # Scene or bare FlatScene
    if fs.light_v0.shape[0] == 0:
        raise ValueError("scene has no emissive triangles to sample")
    p = np.asarray(point, dtype=np.float64)
    dx, dy, dz, dist, lr, lg, lb, pdf = sample_light_raw(
        fs, p[0], p[1], p[2], float(u_pick), float(u1), float(u2)
    )
    return (np.array([dx, dy, dz]), float(dist),
            np.array([lr, lg, lb]), float(pdf))
