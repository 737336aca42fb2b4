"""Render settings shared by both integrators."""

from __future__ import annotations

import os
from dataclasses import dataclass

DEFAULT_GROUP_SIZE = 64


@dataclass(frozen=True)
class RenderConfig:
    width: int = 64
    height: int = 64
    spp: int = 16
    max_depth: int = 5
    seed: int = 0
    nee: bool = False
    rr_start: int = 3  # first bounce eligible for roulette
    workers: int = 1
    group_size: int = DEFAULT_GROUP_SIZE
    deterministic_compaction: bool = True

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("resolution must be at least 1x1")
        if self.spp < 1:
            raise ValueError("spp must be at least 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.group_size < 1:
            raise ValueError("group_size must be at least 1")
        # Hash keys take the seed as an unsigned 64-bit word.
        object.__setattr__(self, "seed", self.seed & 0xFFFFFFFFFFFFFFFF)

    @property
    def pixel_count(self) -> int:
        return self.width * self.height


def workers_from_env(default: int = 1) -> int:
    """Worker count override from PATHBENCH_WORKERS, else the default."""
    raw = os.environ.get("PATHBENCH_WORKERS")
    if raw is None:
        return default
    n = int(raw)
    if n < 1:
        raise ValueError("PATHBENCH_WORKERS must be a positive integer")
    return n
