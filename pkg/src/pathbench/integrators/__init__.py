"""Two schedulers over one path-tracing core: depth-first megakernel
and breadth-first staged wavefront."""

from .common import PathBuffers, alloc_buffers
from .mega import render_frame_mega, trace_path
from .wave import (
    ActiveSet,
    DispatchArgs,
    full_active_set,
    render_frame_wave,
    stage_accumulate,
    stage_compact,
    stage_intersect,
    stage_prepare_indirect,
    stage_raygen,
    stage_shade,
    stage_shadow,
)

__all__ = [
    "PathBuffers", "alloc_buffers",
    "render_frame_mega", "trace_path",
    "ActiveSet", "DispatchArgs", "full_active_set", "render_frame_wave",
    "stage_accumulate", "stage_compact", "stage_intersect",
    "stage_prepare_indirect", "stage_raygen", "stage_shade", "stage_shadow",
    "INTEGRATORS", "render_frame",
]

INTEGRATORS = ("mega", "wave", "wave-nocompact")


def render_frame(name, scene, film, config, sample_index):
    """Render one frame (one sample per pixel) with the named integrator."""
    if name == "mega":
        return render_frame_mega(scene, film, config, sample_index)
    if name == "wave":
        return render_frame_wave(scene, film, config, sample_index)
    if name == "wave-nocompact":
        return render_frame_wave(scene, film, config, sample_index,
                                 compaction=False)
    raise ValueError(f"unknown integrator {name!r}")
