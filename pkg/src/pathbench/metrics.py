"""Benchmark harness and execution-behavior instrumentation.

Everything here is a CPU *software analog* of the GPU throughput metrics
a profiler would report: per-stage wall time, per-bounce active path
counts, dispatched work-item totals, and a virtual-warp occupancy model.
Hardware counters (SM/L2/VRAM utilization and friends) are out of scope,
and the report never labels these numbers as such.  Timings cover
integrator work only — there is no presentation/swapchain cost to
include.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Lane-group width of the virtual-warp occupancy model.
OCC_GROUP = 32
# Benchmark integrators, in report order; the first is the speedup baseline.
BENCH_INTEGRATORS = ("mega", "wave-nocompact", "wave")
# Max abs disagreement tolerated between integrator outputs before timing
# results are trusted.
EQUIVALENCE_TOL = 1e-5

# Frozen CSV schema (see README).  Stage columns hold nanoseconds; cells
# for stages an integrator does not run are left empty.
CSV_COLUMNS = (
    "record", "integrator", "frame", "bounce",
    "active_pre", "active_post", "dispatched", "occupancy",
    "raygen_ns", "intersect_ns", "shade_ns", "shadow_ns",
    "compact_ns", "prepare_ns", "accumulate_ns", "trace_ns", "total_ns",
    "mean_ms", "min_ms", "fps", "speedup", "clamped",
)
STAGE_ORDER = ("raygen", "intersect", "shade", "shadow",
               "compact", "prepare", "accumulate", "trace")


class EquivalenceError(RuntimeError):
    """Integrator outputs disagreed beyond tolerance during a benchmark."""


@dataclass
class StageStats:
    """Execution record of one rendered frame (one sample per pixel).

    Per-bounce lists always have max_depth entries; bounces that never
    ran (early termination) hold zeros.  `stage_ns` maps stage name to
    nanoseconds for the stages this integrator actually runs.
    """

    integrator: str
    total_ns: int
    stage_ns: dict
    active_pre: list
    active_post: list
    dispatched: list
    occupancy: list
    clamped: int


@dataclass
class IntegratorRun:
    """Timed result for one integrator: warmup frame excluded."""

    name: str
    frame_ms: list
    mean_ms: float
    min_ms: float
    fps: float
    speedup: float
    frame_stats: list

    @property
    def total_dispatched(self) -> int:
        return sum(sum(s.dispatched) for s in self.frame_stats)


@dataclass
class BenchReport:
    scene_label: str
    config: object
    repeat: int
    results: list

    def result(self, name: str) -> IntegratorRun:
        for run in self.results:
            if run.name == name:
                return run
        raise KeyError(name)


def resident_groups(lane_activity, group_size: int = OCC_GROUP) -> int:
    """Number of in-order lane groups containing at least one active lane."""
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    lanes = np.asarray(lane_activity, dtype=bool).ravel()
    pad = (-lanes.size) % group_size
    if pad:
        lanes = np.concatenate([lanes, np.zeros(pad, dtype=bool)])
    return int(lanes.reshape(-1, group_size).any(axis=1).sum())


def occupancy(lane_activity, group_size: int = OCC_GROUP) -> float:
    """Active-lane fraction over the lane groups that hold any work.

    The lanes are partitioned in order into groups of `group_size`; a
    group with at least one active lane counts as resident.  Returns
    total active / (group_size * resident groups), or 0.0 when nothing
    is active.
    """
    lanes = np.asarray(lane_activity, dtype=bool).ravel()
    total = int(lanes.sum())
    if total == 0 and group_size >= 1:
        return 0.0
    return total / (group_size * resident_groups(lanes, group_size))


def compare_images(a, b):
    """(max_abs, mean_abs, rmse) over all channels of two equal-shape
    linear images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image dimensions differ: {a.shape} vs {b.shape}")
    d = np.abs(a - b)
    return float(d.max()), float(d.mean()), float(np.sqrt(np.mean(d * d)))


def run_benchmark(scene, config, repeat: int, scene_label: str = "scene"):
    """Render identical frame workloads with all three integrators.

    Each integrator renders 1 + `repeat` frames on its own film; frame 0
    is the discarded warmup (JIT compilation, cache residency).  The
    final films must agree within EQUIVALENCE_TOL before any timing is
    reported; disagreement raises EquivalenceError with a diff summary.
    """
    if repeat < 1:
        raise ValueError("repeat must be >= 1")
    from .film import Film
    from .integrators import render_frame

    images = {}
    collected = []
    for name in BENCH_INTEGRATORS:
        film = Film(config.width, config.height)
        frame_stats = []
        for frame in range(repeat + 1):
            stats = render_frame(name, scene, film, config, frame)
            if frame > 0:
                frame_stats.append(stats)
        images[name] = film.linear_image()
        collected.append((name, frame_stats))

    base_name = BENCH_INTEGRATORS[0]
    failures = []
    for name in BENCH_INTEGRATORS[1:]:
        max_abs, mean_abs, rmse = compare_images(images[base_name], images[name])
        if max_abs > EQUIVALENCE_TOL:
            failures.append(
                f"{base_name} vs {name}: max_abs={max_abs:.6e} "
                f"mean_abs={mean_abs:.6e} rmse={rmse:.6e}"
            )
    if failures:
        raise EquivalenceError(
            "integrator outputs disagree beyond "
            f"{EQUIVALENCE_TOL:g}:\n" + "\n".join(failures)
        )

    mega_mean = float(np.mean([s.total_ns for s in collected[0][1]])) / 1e6
    results = []
    for name, frame_stats in collected:
        ms = [s.total_ns / 1e6 for s in frame_stats]
        mean_ms = float(np.mean(ms))
        results.append(IntegratorRun(
            name=name,
            frame_ms=ms,
            mean_ms=mean_ms,
            min_ms=float(min(ms)),
            fps=1000.0 / mean_ms,
            speedup=mega_mean / mean_ms,
            frame_stats=frame_stats,
        ))
    return BenchReport(scene_label=scene_label, config=config,
                       repeat=repeat, results=results)


def mean_occupancy(run: IntegratorRun) -> float:
    """Mean modeled occupancy over every executed bounce of the timed
    frames; informational summary for the report table."""
    values = [occ
              for stats in run.frame_stats
              for occ, disp in zip(stats.occupancy, stats.dispatched)
              if disp > 0]
    return float(np.mean(values)) if values else 0.0


def format_table(report: BenchReport) -> str:
    """Human-readable summary: one row per integrator (software analogs
    of frame-time/occupancy columns; nothing here is a GPU counter)."""
    cfg = report.config
    lines = [
        f"scene={report.scene_label} {cfg.width}x{cfg.height} "
        f"depth={cfg.max_depth} seed={cfg.seed} "
        f"nee={'on' if cfg.nee else 'off'} workers={cfg.workers} "
        f"repeat={report.repeat} (timing: integrator only; "
        "occupancy/dispatch are software analogs)",
        f"{'integrator':<16}{'mean ms':>10}{'min ms':>10}{'fps':>10}"
        f"{'speedup':>10}{'occupancy':>11}{'dispatched':>12}",
    ]
    for run in report.results:
        lines.append(
            f"{run.name:<16}{run.mean_ms:>10.3f}{run.min_ms:>10.3f}"
            f"{run.fps:>10.1f}{run.speedup:>9.2f}x"
            f"{mean_occupancy(run):>11.3f}{run.total_dispatched:>12d}"
        )
    return "\n".join(lines)


def _row(values) -> str:
    return ",".join("" if v is None else
                    repr(v) if isinstance(v, float) else str(v)
                    for v in values)


def emit_csv(report: BenchReport, path) -> None:
    """Write the report in the frozen CSV_COLUMNS schema.

    One `bounce` row per (integrator, frame, bounce) — frame-level cells
    (stage times, total, clamp count) are repeated on each of the
    frame's bounce rows — plus one `summary` row per integrator holding
    stage totals and the timing aggregates.  Emission is deterministic:
    the same report always produces a byte-identical file.
    """
    lines = [",".join(CSV_COLUMNS)]
    for run in report.results:
        for frame, stats in enumerate(run.frame_stats):
            stage_cells = [stats.stage_ns.get(s) for s in STAGE_ORDER]
            for b in range(len(stats.active_pre)):
                lines.append(_row(
                    ["bounce", run.name, frame, b,
                     stats.active_pre[b], stats.active_post[b],
                     stats.dispatched[b], stats.occupancy[b]]
                    + stage_cells
                    + [stats.total_ns, None, None, None, None, stats.clamped]
                ))
        totals = {}
        for stats in run.frame_stats:
            for k, v in stats.stage_ns.items():
                totals[k] = totals.get(k, 0) + v
        lines.append(_row(
            ["summary", run.name, None, None, None, None,
             run.total_dispatched, None]
            + [totals.get(s) for s in STAGE_ORDER]
            + [sum(s.total_ns for s in run.frame_stats),
               run.mean_ms, run.min_ms, run.fps, run.speedup,
               sum(s.clamped for s in run.frame_stats)]
        ))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
