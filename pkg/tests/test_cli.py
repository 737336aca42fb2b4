"""End-to-end CLI tests: subcommands, exit codes, file outputs."""

import numpy as np

from pathbench.cli import main
from pathbench.film import read_pfm
from pathbench.metrics import CSV_COLUMNS


def _render_args(tmp_path, name, **flags):
    out = tmp_path / f"{name}.pfm"
    args = ["render", "--scene", "cornell", "--size", "8x8", "--spp", "2",
            "-o", str(out)]
    for flag, value in flags.items():
        args.append(f"--{flag.replace('_', '-')}")
        if value is not True:
            args.append(str(value))
    return args, out


class TestRender:
    def test_default_scene_renders_deterministically(self, tmp_path):
        args_a, out_a = _render_args(tmp_path, "a")
        args_b, out_b = _render_args(tmp_path, "b")
        assert main(args_a) == 0
        assert main(args_b) == 0
        assert out_a.read_bytes() == out_b.read_bytes()
        img = read_pfm(out_a)
        assert img.shape == (8, 8, 3) and img.max() > 0
        assert out_a.with_suffix(".csv").exists()

    def test_integrators_agree_through_cli(self, tmp_path):
        args_m, out_m = _render_args(tmp_path, "mega", integrator="mega")
        args_w, out_w = _render_args(tmp_path, "wave", integrator="wave")
        assert main(args_m) == 0
        assert main(args_w) == 0
        a, b = read_pfm(out_m), read_pfm(out_w)
        assert np.abs(a - b).max() <= 1e-5
        assert np.array_equal(a, b)  # deterministic mode is bitwise

    def test_ppm_output(self, tmp_path):
        ppm = tmp_path / "view.ppm"
        args, _ = _render_args(tmp_path, "a", ppm=str(ppm))
        assert main(args) == 0
        assert ppm.read_bytes().startswith(b"P6\n8 8\n255\n")

    def test_csv_has_frozen_header(self, tmp_path):
        args, out = _render_args(tmp_path, "a")
        assert main(args) == 0
        header = out.with_suffix(".csv").read_text().splitlines()[0]
        assert header == ",".join(CSV_COLUMNS)

    def test_unknown_integrator_is_usage_error(self, tmp_path):
        args, _ = _render_args(tmp_path, "a", integrator="slang")
        assert main(args) == 2

    def test_bad_size_is_usage_error(self):
        assert main(["render", "--size", "64by64"]) == 2

    def test_missing_subcommand_is_usage_error(self):
        assert main([]) == 2

    def test_invalid_config_value(self, tmp_path):
        args, _ = _render_args(tmp_path, "a", spp="0")
        assert main(args) == 2

    def test_missing_scene_file(self, tmp_path):
        args, _ = _render_args(tmp_path, "a", scene="nope.scene")
        assert main(args) == 3

    def test_workers_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PATHBENCH_WORKERS", "2")
        args_env, out_env = _render_args(tmp_path, "env")
        assert main(args_env) == 0
        monkeypatch.delenv("PATHBENCH_WORKERS")
        args_one, out_one = _render_args(tmp_path, "one", workers="1")
        assert main(args_one) == 0
        assert out_env.read_bytes() == out_one.read_bytes()

    def test_invalid_workers_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PATHBENCH_WORKERS", "many")
        args, _ = _render_args(tmp_path, "a")
        assert main(args) == 2
        # an explicit flag bypasses the bad environment value
        args, _ = _render_args(tmp_path, "b", workers="1")
        assert main(args) == 0


class TestBench:
    def test_summary_and_csv(self, tmp_path, capsys):
        csv = tmp_path / "bench.csv"
        code = main(["bench", "--scene", "cornell", "--size", "8x8",
                     "--repeat", "1", "--csv", str(csv)])
        assert code == 0
        table = capsys.readouterr().out
        for name in ("mega", "wave-nocompact", "wave"):
            assert name in table
        lines = csv.read_text().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        # 3 integrators x 1 frame x 5 bounces + 3 summaries
        assert len(lines) == 1 + 15 + 3

    def test_repeat_validation(self, tmp_path):
        code = main(["bench", "--size", "8x8", "--repeat", "0",
                     "--csv", str(tmp_path / "x.csv")])
        assert code == 2


class TestCompare:
    def test_identical_images_pass_zero_tolerance(self, tmp_path):
        args, out = _render_args(tmp_path, "a")
        assert main(args) == 0
        assert main(["compare", str(out), str(out)]) == 0

    def test_seed_change_fails_zero_tolerance(self, tmp_path, capsys):
        args_a, out_a = _render_args(tmp_path, "a")
        args_b, out_b = _render_args(tmp_path, "b", seed="9")
        assert main(args_a) == 0
        assert main(args_b) == 0
        assert main(["compare", str(out_a), str(out_b)]) == 1
        assert "max_abs=" in capsys.readouterr().out
        assert main(["compare", str(out_a), str(out_b),
                     "--tolerance", "1e9"]) == 0

    def test_dimension_mismatch_is_config_error(self, tmp_path):
        args_a, out_a = _render_args(tmp_path, "a")
        small = tmp_path / "small.pfm"
        args_s = ["render", "--size", "4x4", "--spp", "1", "-o", str(small)]
        assert main(args_a) == 0
        assert main(args_s) == 0
        assert main(["compare", str(out_a), str(small)]) == 2

    def test_missing_file_is_io_error(self, tmp_path):
        assert main(["compare", str(tmp_path / "x.pfm"),
                     str(tmp_path / "y.pfm")]) == 3
