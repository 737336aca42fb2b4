"""Deterministic, stateless sample generation.

Two generators cover every random decision in the renderer:

* Halton radical inverses (bases 2 and 3) with a per-pixel
  Cranley-Patterson rotation provide the pixel jitter for primary rays.
* A counter-based hash generator keyed by
  (seed, pixel, sample, bounce, dimension) provides every path-sampling
  decision.  Because a draw is a pure function of its key, the megakernel
  and wavefront integrators consume bit-identical streams no matter how
  work is scheduled or partitioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

# Dimension indices within one bounce.  This enumeration is part of the
# sample-stream layout and must stay stable across versions.
DIM_BSDF_U1 = 0
DIM_BSDF_U2 = 1
DIM_RR = 2
DIM_LIGHT_PICK = 3
DIM_LIGHT_U1 = 4
DIM_LIGHT_U2 = 5

# Internal stream tags for the per-pixel rotation offsets; they live in the
# same key space as the bounce dimensions but far away from them.
_TAG_ROT_X = 0x51A0_0001
_TAG_ROT_Y = 0x51A0_0002

_U64 = np.uint64
_INV_2_53 = 1.0 / 9007199254740992.0  # 2^-53


@dataclass(frozen=True)
class SampleKey:
    """Key addressing a single uniform draw."""

    seed: int
    pixel_index: int
    sample_index: int
    bounce: int
    dimension: int


@dataclass(frozen=True)
class PixelJitter:
    """Sub-pixel offset in [0,1)^2 for a primary ray."""

    jx: float
    jy: float


@njit(cache=True, nogil=True)
def _mix64(z):
    # splitmix64 finalizer: full-avalanche bijection on 64-bit words.
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


@njit(cache=True, nogil=True)
def hash_key(seed, pixel_index, sample_index, bounce, dimension):
    """Avalanche hash of the full sample key to a 64-bit word.

    Each field is injected between bijective mixing rounds, so two keys
    differing in any field hash to decorrelated words.
    """
    h = _mix64(_U64(seed) + _U64(0x9E3779B97F4A7C15))
    h = _mix64(h ^ (_U64(pixel_index) + _U64(0xA0761D6478BD642F)))
    h = _mix64(h ^ (_U64(sample_index) + _U64(0xE7037ED1A0B428DB)))
    h = _mix64(h ^ (_U64(bounce) + _U64(0x8EBC6AF09C88C6E3)))
    h = _mix64(h ^ (_U64(dimension) + _U64(0x589965CC75374CC3)))
    return h


@njit(cache=True, nogil=True)
def uniform_raw(seed, pixel_index, sample_index, bounce, dimension):
    """Uniform draw in [0,1) for a sample key given as scalars."""
    h = hash_key(seed, pixel_index, sample_index, bounce, dimension)
    return np.float64(h >> _U64(11)) * _INV_2_53


@njit(cache=True, nogil=True)
def radical_inverse(base, index):
    """Digit-reversed fraction of ``index`` in ``base``; index 0 maps to 0.

    The reversed digits are accumulated as an exact integer and divided
    once, so the result is the correctly rounded value of the exact
    rational.
    """
    rev = 0
    scale = 1
    n = index
    while n > 0:
        rev = rev * base + n % base
        scale = scale * base
        n = n // base
    return rev / scale


@njit(cache=True, nogil=True)
def pixel_rotation(seed, pixel_index):
    """Per-pixel Cranley-Patterson offsets in [0,1)^2."""
    hx = hash_key(seed, pixel_index, 0, 0, _TAG_ROT_X)
    hy = hash_key(seed, pixel_index, 0, 0, _TAG_ROT_Y)
    ox = np.float64(hx >> _U64(11)) * _INV_2_53
    oy = np.float64(hy >> _U64(11)) * _INV_2_53
    return ox, oy


@njit(cache=True, nogil=True)
def pixel_jitter_raw(seed, pixel_index, sample_index):
    """Rotated Halton jitter (bases 2 and 3) for one pixel sample.

    Halton indexing starts at sample_index + 1 so the degenerate all-zero
    first point is never used.
    """
    hx = radical_inverse(2, sample_index + 1)
    hy = radical_inverse(3, sample_index + 1)
    ox, oy = pixel_rotation(seed, pixel_index)
    jx = hx + ox
    if jx >= 1.0:
        jx -= 1.0
    jy = hy + oy
    if jy >= 1.0:
        jy -= 1.0
    return jx, jy


@njit(cache=True, nogil=True)
def cosine_hemisphere(u1, u2):
    """Cosine-weighted direction about +z; returns (x, y, z, pdf).

    Mapping: r = sqrt(u1), phi = 2*pi*u2, z = sqrt(1 - u1); pdf = z / pi.
    """
    r = math.sqrt(u1)
    phi = 2.0 * math.pi * u2
    x = r * math.cos(phi)
    y = r * math.sin(phi)
    z = math.sqrt(1.0 - u1)
    return x, y, z, z / math.pi


def uniform(key: SampleKey) -> float:
    """Uniform draw in [0,1) for a sample key (pure function of the key)."""
    return float(
        uniform_raw(key.seed, key.pixel_index, key.sample_index, key.bounce, key.dimension)
    )


def pixel_jitter(seed: int, pixel_index: int, sample_index: int) -> PixelJitter:
    """Rotated Halton jitter for pixel ``pixel_index`` at ``sample_index``."""
    jx, jy = pixel_jitter_raw(seed, pixel_index, sample_index)
    return PixelJitter(float(jx), float(jy))


def sample_cosine_hemisphere(u1: float, u2: float) -> tuple[np.ndarray, float]:
    """Cosine-weighted hemisphere sample as (unit direction, pdf)."""
    x, y, z, pdf = cosine_hemisphere(u1, u2)
    return np.array([x, y, z]), float(pdf)
