"""Command-line entry point: render / bench / compare workflows.

Exit codes: 0 success, 1 comparison or equivalence failure, 2 usage or
config error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import RenderConfig, workers_from_env
from .film import Film, read_pfm, tonemap, write_pfm, write_ppm
from .integrators import INTEGRATORS, render_frame
from .metrics import (
    BenchReport,
    EquivalenceError,
    IntegratorRun,
    compare_images,
    emit_csv,
    format_table,
    run_benchmark,
)
from .scene import cornell_box, furnace_sphere, load_scene
from .scene.types import SceneError

BUILTIN_SCENES = {
    "cornell": cornell_box,
    "furnace-sphere": furnace_sphere,
}


def _parse_size(text: str):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected WIDTHxHEIGHT (e.g. 64x64), got {text!r}")


def _build_scene(name, width, height):
    if name in BUILTIN_SCENES:
        return BUILTIN_SCENES[name](width, height)
    return load_scene(name).with_resolution(width, height)


def _make_config(args) -> RenderConfig:
    workers = (args.workers if args.workers is not None
               else workers_from_env(1))
    return RenderConfig(
        width=args.size[0], height=args.size[1], spp=args.spp,
        max_depth=args.max_depth, seed=args.seed, nee=args.nee,
        workers=workers, group_size=args.group_size,
        deterministic_compaction=not args.atomic_compaction)


def cmd_render(args) -> int:
    scene = _build_scene(args.scene, *args.size)
    config = _make_config(args)
    film = Film(config.width, config.height)
    stats = [render_frame(args.integrator, scene, film, config, s)
             for s in range(config.spp)]
    write_pfm(args.output, film.linear_image())
    if args.ppm:
        write_ppm(args.ppm, tonemap(film))

    ms = [s.total_ns / 1e6 for s in stats]
    mean_ms = float(np.mean(ms))
    run = IntegratorRun(name=args.integrator, frame_ms=ms, mean_ms=mean_ms,
                        min_ms=float(min(ms)), fps=1000.0 / mean_ms,
                        speedup=1.0, frame_stats=stats)
    report = BenchReport(scene_label=args.scene, config=config,
                         repeat=config.spp, results=[run])
    csv_path = args.csv or Path(args.output).with_suffix(".csv")
    emit_csv(report, csv_path)
    print(f"{args.integrator}: {config.spp} spp in {sum(ms):.1f} ms "
          f"-> {args.output} (stats: {csv_path})")
    return 0


def cmd_bench(args) -> int:
    scene = _build_scene(args.scene, *args.size)
    config = _make_config(args)
    try:
        report = run_benchmark(scene, config, args.repeat,
                               scene_label=args.scene)
    except EquivalenceError as err:
        print(f"equivalence gate failed:\n{err}", file=sys.stderr)
        return 1
    print(format_table(report))
    emit_csv(report, args.csv)
    print(f"stats: {args.csv}")
    return 0


def cmd_compare(args) -> int:
    a = read_pfm(args.image_a)
    b = read_pfm(args.image_b)
    max_abs, mean_abs, rmse = compare_images(a, b)
    print(f"max_abs={max_abs:.6e} mean_abs={mean_abs:.6e} rmse={rmse:.6e}")
    if max_abs > args.tolerance:
        print(f"images differ beyond tolerance {args.tolerance:g}",
              file=sys.stderr)
        return 1
    return 0


def _add_scene_flags(sub):
    sub.add_argument("--scene", default="cornell",
                     help="built-in name (cornell, furnace-sphere) or scene "
                          "file path (default: cornell)")
    sub.add_argument("--size", type=_parse_size, default=(64, 64),
                     metavar="WxH", help="image size (default: 64x64)")
    sub.add_argument("--spp", type=int, default=16,
                     help="samples per pixel (default: 16)")
    sub.add_argument("--max-depth", type=int, default=5,
                     help="path length limit in bounces (default: 5)")
    sub.add_argument("--nee", action="store_true",
                     help="enable next-event estimation (default: off)")
    sub.add_argument("--seed", type=int, default=0,
                     help="RNG seed (default: 0)")
    sub.add_argument("--workers", type=int, default=None,
                     help="worker threads (default: $PATHBENCH_WORKERS or 1)")
    sub.add_argument("--group-size", type=int, default=64,
                     help="dispatch workgroup size (default: 64)")
    sub.add_argument("--atomic-compaction", action="store_true",
                     help="unordered atomic-counter compaction instead of "
                          "the deterministic scan")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathbench",
        description="Dual-architecture CPU path tracer benchmark")
    commands = parser.add_subparsers(dest="command", required=True)

    render = commands.add_parser("render", help="render one image")
    _add_scene_flags(render)
    render.add_argument("--integrator", choices=INTEGRATORS, default="mega",
                        help="integrator architecture (default: mega)")
    render.add_argument("-o", "--output", default="out.pfm",
                        help="PFM output path (default: out.pfm)")
    render.add_argument("--ppm", default=None, metavar="PATH",
                        help="also write a tonemapped 8-bit PPM")
    render.add_argument("--csv", default=None, metavar="PATH",
                        help="stats CSV path (default: output stem + .csv)")
    render.set_defaults(func=cmd_render)

    bench = commands.add_parser(
        "bench", help="time all integrators on one workload")
    _add_scene_flags(bench)
    bench.add_argument("--repeat", type=int, default=3,
                       help="timed frames per integrator after the "
                            "discarded warmup frame (default: 3)")
    bench.add_argument("--csv", default="bench.csv",
                       help="report CSV path (default: bench.csv)")
    bench.set_defaults(func=cmd_bench)

    compare = commands.add_parser("compare", help="diff two PFM images")
    compare.add_argument("image_a")
    compare.add_argument("image_b")
    compare.add_argument("--tolerance", type=float, default=0.0,
                         help="max abs difference allowed (default: 0)")
    compare.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:  # argparse usage errors / --help
        return int(exit_.code or 0)
    try:
        return args.func(args)
    except (SceneError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
