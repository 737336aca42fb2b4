"""Reduced surface model: Lambertian base plus a metallic GGX lobe.

    f = base_color * (1 - metallic) / pi
      + metallic * F * D * G / (4 cos_o cos_i)

with Schlick Fresnel around F0 = lerp(0.04, base_color, metallic) and
Smith-separable GGX shadowing.  Directions are unit vectors in the local
shading frame (+z = shading normal).  Sampling picks the specular lobe
with probability `metallic` (so metallic 0 is exactly cosine-sampled
Lambertian) and the sampled lobe's `u1` is stretched back to [0, 1).
Roughness 0 turns the specular lobe into a perfect mirror, flagged by a
pdf sentinel of -1 with `f` carrying the ready-made throughput weight.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..sampler import cosine_hemisphere

INV_PI = 1.0 / np.pi
ALPHA_MIN = 1e-4  # keeps near-zero (but nonzero) roughness finite
DELTA_PDF = -1.0


@njit(cache=True, nogil=True)
def _smith_g1(c, a2):
    return 2.0 * c / (c + np.sqrt(a2 + (1.0 - a2) * c * c))


@njit(cache=True, nogil=True)
def bsdf_eval_local(br, bg, bb, rough, metal, wox, woy, woz, wix, wiy, wiz):
    """(f_rgb, pdf) of the non-delta lobes; zero below the hemisphere."""
    if woz <= 0.0 or wiz <= 0.0:
        return 0.0, 0.0, 0.0, 0.0
    p_diff = 1.0 - metal
    fr = 0.0
    fg = 0.0
    fb = 0.0
    pdf = 0.0
    if p_diff > 0.0:
        k = p_diff * INV_PI
        fr = br * k
        fg = bg * k
        fb = bb * k
        pdf = p_diff * (wiz * INV_PI)
    if metal > 0.0 and rough > 0.0:
        hx = wox + wix
        hy = woy + wiy
        hz = woz + wiz
        hl = np.sqrt(hx * hx + hy * hy + hz * hz)
        if hl > 1e-12:
            hx /= hl
            hy /= hl
            hz /= hl
            cos_d = wox * hx + woy * hy + woz * hz
            if cos_d > 1e-12:
                alpha = rough * rough
                if alpha < ALPHA_MIN:
                    alpha = ALPHA_MIN
                a2 = alpha * alpha
                denom = hz * hz * (a2 - 1.0) + 1.0
                d_ndf = a2 / (np.pi * denom * denom)
                g = _smith_g1(woz, a2) * _smith_g1(wiz, a2)
                s = 1.0 - cos_d
                s5 = s * s * s * s * s
                k_spec = metal * d_ndf * g / (4.0 * woz * wiz)
                f0r = 0.04 * p_diff + br * metal
                f0g = 0.04 * p_diff + bg * metal
                f0b = 0.04 * p_diff + bb * metal
                fr += (f0r + (1.0 - f0r) * s5) * k_spec
                fg += (f0g + (1.0 - f0g) * s5) * k_spec
                fb += (f0b + (1.0 - f0b) * s5) * k_spec
                pdf += metal * d_ndf * hz / (4.0 * cos_d)
    return fr, fg, fb, pdf


@njit(cache=True, nogil=True)
def bsdf_sample_local(br, bg, bb, rough, metal, wox, woy, woz, u1, u2):
    """Draw a direction; returns (wi, f_rgb, pdf, is_delta).

    pdf == DELTA_PDF marks a mirror sample whose f is the full throughput
    weight; pdf == 0 means "terminate the path".
    """
    if woz <= 0.0:
        return 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, False

    if u1 < metal:
        if rough == 0.0:
            # Perfect mirror: weight is Fresnel at the surface normal.
            s = 1.0 - woz
            s5 = s * s * s * s * s
            p_diff = 1.0 - metal
            f0r = 0.04 * p_diff + br * metal
            f0g = 0.04 * p_diff + bg * metal
            f0b = 0.04 * p_diff + bb * metal
            return (
                -wox, -woy, woz,
                f0r + (1.0 - f0r) * s5,
                f0g + (1.0 - f0g) * s5,
                f0b + (1.0 - f0b) * s5,
                DELTA_PDF, True,
            )
        u = u1 / metal
        alpha = rough * rough
        if alpha < ALPHA_MIN:
            alpha = ALPHA_MIN
        a2 = alpha * alpha
        c2 = (1.0 - u) / (1.0 + (a2 - 1.0) * u)
        ch = np.sqrt(c2)
        sh = np.sqrt(max(0.0, 1.0 - c2))
        phi = 2.0 * np.pi * u2
        hx = sh * np.cos(phi)
        hy = sh * np.sin(phi)
        hz = ch
        cos_d = wox * hx + woy * hy + woz * hz
        if cos_d <= 0.0:
            return 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, False
        wix = 2.0 * cos_d * hx - wox
        wiy = 2.0 * cos_d * hy - woy
        wiz = 2.0 * cos_d * hz - woz
        if wiz <= 0.0:
            return 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, False
    else:
        u = (u1 - metal) / (1.0 - metal)
        wix, wiy, wiz, _ = cosine_hemisphere(u, u2)

    fr, fg, fb, pdf = bsdf_eval_local(
        br, bg, bb, rough, metal, wox, woy, woz, wix, wiy, wiz
    )
    return wix, wiy, wiz, fr, fg, fb, pdf, False


def _to_local(geom, w):
    return np.array([
        float(np.dot(w, geom.tangent)),
        float(np.dot(w, geom.bitangent)),
        float(np.dot(w, geom.shading_normal)),
    ])


def bsdf_eval(material, wo, wi, geom):
    """World-space wrapper; returns (f RGB, pdf)."""
    lo = _to_local(geom, np.asarray(wo, dtype=np.float64))
    li = _to_local(geom, np.asarray(wi, dtype=np.float64))
    br, bg, bb = material.base_color
    fr, fg, fb, pdf = bsdf_eval_local(
        br, bg, bb, material.roughness, material.metallic,
        lo[0], lo[1], lo[2], li[0], li[1], li[2],
    )
    return np.array([fr, fg, fb]), float(pdf)


def bsdf_sample(material, wo, geom, u1, u2):
    """World-space wrapper; returns (wi, f RGB, pdf) with the delta
    sentinel pdf = -1 passed through."""
    lo = _to_local(geom, np.asarray(wo, dtype=np.float64))
    br, bg, bb = material.base_color
    wix, wiy, wiz, fr, fg, fb, pdf, _ = bsdf_sample_local(
        br, bg, bb, material.roughness, material.metallic,
        lo[0], lo[1], lo[2], float(u1), float(u2),
    )
    wi = (wix * geom.tangent + wiy * geom.bitangent
          + wiz * geom.shading_normal)
    return wi, np.array([fr, fg, fb]), float(pdf)
