import json
import math

import pytest
from click.testing import CliRunner

from binormal.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, args, **kw):
    return runner.invoke(main, args, catch_exceptions=False, **kw)


class TestVerifyCommands:
    def test_two_sphere_canonical_passes(self, runner):
        res = invoke(runner, ["verify", "two-sphere", "--dim", "3",
                              "--center", "0,0,0", "--r1", "1", "--r2", "2",
                              "--x", "0,0,0", "--grid-point", "3,0,0",
                              "--no-timestamp"])
        assert res.exit_code == 0
        env = json.loads(res.output)
        assert env["pass"] is True
        rep = env["reports"][0]
        assert rep["max_abs"] <= 1e-10
        assert rep["metadata"]["grid_size"] == 109

    def test_normal_counterexample_fails_with_exit_2(self, runner):
        res = invoke(runner, ["verify", "normal", "--dim", "3",
                              "--no-timestamp"])
        assert res.exit_code == 2
        env = json.loads(res.output)
        assert env["pass"] is False
        by_name = {r["name"]: r for r in env["reports"]}
        assert by_name["2-normal potential criterion"]["pass"] is True
        assert by_name["pure-binormal potential criterion"]["pass"] is False

    def test_sweep_command(self, runner):
        res = invoke(runner, ["verify", "sweep", "--dim", "2", "--x", "0.5,0",
                              "--no-timestamp"])
        assert res.exit_code == 0
        assert json.loads(res.output)["pass"] is True

    def test_generators_command(self, runner):
        res = invoke(runner, ["verify", "generators", "--dim", "2", "-m", "64",
                              "--no-timestamp"])
        assert res.exit_code == 0

    def test_superposed_command(self, runner):
        res = invoke(runner, ["verify", "superposed", "--dim", "2",
                              "--atom", "1.0@0,0", "--atom", "0.5@0.2,0",
                              "--quad-order", "128", "--no-timestamp"])
        assert res.exit_code == 0

    def test_quad_order_env_override(self, runner, monkeypatch):
        monkeypatch.setenv("BINORMAL_QUAD_ORDER", "64")
        res = invoke(runner, ["verify", "two-sphere", "--dim", "2",
                              "--no-timestamp"])
        env = json.loads(res.output)
        assert env["reports"][0]["metadata"]["quad_order"] == 64

    def test_usage_error_exit_1(self, runner):
        res = invoke(runner, ["verify", "two-sphere", "--x", "zzz",
                              "--no-timestamp"])
        assert res.exit_code == 1  # UsageError from click

    def test_help_exits_zero(self, runner):
        res = invoke(runner, ["--help"])
        assert res.exit_code == 0
        assert "verify" in res.output


class TestSolveCommands:
    def test_wos_laplace_matches_library(self, runner):
        from binormal.geometry import ball
        from binormal.wos import BallDomain, WosConfig, wos_laplace
        res = invoke(runner, ["solve", "wos-laplace", "--domain", "ball:0,0:1",
                              "--f1", "z1^2", "--point", "0,0",
                              "--samples", "5000", "--seed", "7",
                              "--no-timestamp"])
        assert res.exit_code == 0
        got = json.loads(res.output)["reports"][0]
        lib = wos_laplace(BallDomain(ball([0, 0], 1.0)),
                          lambda p: p[:, 0] ** 2, [0.0, 0.0],
                          WosConfig(samples=5000, seed=7))
        assert got["value"] == lib.value
        assert got["stderr"] == lib.stderr

    def test_wos_riquier_schema(self, runner):
        res = invoke(runner, ["solve", "wos-riquier", "--domain", "ball:0,0:1",
                              "--f1", "z1^2", "--f2", "-2", "--point", "0.3,0",
                              "--samples", "2000", "--no-timestamp"])
        assert res.exit_code == 0
        reports = json.loads(res.output)["reports"]
        assert [r["component"] for r in reports] == ["u1", "u2"]
        for r in reports:
            for key in ("value", "stderr", "samples_used", "mean_steps",
                        "truncated_walks"):
                assert key in r

    def test_riquier_accepts_zoo_pair(self, runner):
        res = invoke(runner, ["solve", "wos-riquier", "--domain", "ball:0,0:1",
                              "--pair", "almansi:h=1,q=0", "--point", "0.3,0",
                              "--samples", "2000", "--no-timestamp"])
        assert res.exit_code == 0
        env = json.loads(res.output)
        # u1 = |z|^2 on the disk: exact value |x|^2 = 0.09 up to MC noise
        u1 = env["reports"][0]
        assert abs(u1["value"] - 0.09) < 0.05

    def test_field_accepts_zoo_identifier(self, runner):
        res = invoke(runner, ["solve", "wos-laplace", "--domain", "ball:0,0:1",
                              "--f1", "harmonic:z1", "--point", "0.2,0",
                              "--samples", "1000", "--no-timestamp"])
        assert res.exit_code == 0

    def test_branching_command(self, runner):
        res = invoke(runner, ["solve", "two-sphere-walk",
                              "--domain", "ball:0,0:1", "--f1", "z1^2",
                              "--point", "0,0", "--samples", "500",
                              "--depth-cap", "8", "--no-timestamp"])
        assert res.exit_code == 0

    def test_box_domain_spec(self, runner):
        res = invoke(runner, ["solve", "wos-laplace",
                              "--domain", "box:0,0:1,1", "--f1", "z1",
                              "--point", "0.5,0.5", "--samples", "2000",
                              "--no-timestamp"])
        assert res.exit_code == 0


class TestExportGrid:
    def test_newtonian_values_17_digits(self, runner, tmp_path):
        out = tmp_path / "grid.csv"
        res = invoke(runner, ["export", "grid", "--kernel", "newtonian",
                              "--dim", "3", "--y", "0,0,0",
                              "--points", "1,0,0;2,0,0;4,0,0",
                              "--out", str(out)])
        assert res.exit_code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "x1,x2,x3,value"
        vals = [float(line.split(",")[-1]) for line in lines[1:]]
        assert vals == [1 / (4 * math.pi), 1 / (8 * math.pi), 1 / (16 * math.pi)]

    def test_pole_gives_nan_and_exit_3(self, runner, tmp_path):
        out = tmp_path / "grid.csv"
        res = invoke(runner, ["export", "grid", "--kernel", "newtonian",
                              "--dim", "2", "--y", "1,0",
                              "--points", "1,0;2,0", "--out", str(out)])
        assert res.exit_code == 3
        assert ",nan" in out.read_text()

    def test_byte_identical_reruns(self, runner, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["export", "grid", "--kernel", "ball-green", "--dim", "2",
                "--y", "0.3,0", "--ball", "0,0:1",
                "--grid", "-0.5:0.5:3,-0.5:0.5:3"]
        invoke(runner, args + ["--out", str(a)])
        invoke(runner, args + ["--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_lexicographic_grid_order(self, runner, tmp_path):
        out = tmp_path / "grid.csv"
        invoke(runner, ["export", "grid", "--kernel", "biharmonic", "--dim", "2",
                        "--y", "5,5", "--grid", "0:1:2,0:1:2",
                        "--out", str(out)])
        rows = [line.split(",")[:2] for line in
                out.read_text().strip().split("\n")[1:]]
        assert rows == [["0", "0"], ["0", "1"], ["1", "0"], ["1", "1"]]


class TestZoo:
    def test_list_runs(self, runner):
        res = invoke(runner, ["zoo", "list", "--dim", "2", "--max-degree", "2"])
        assert res.exit_code == 0
        assert "almansi" in res.output


CONFIG = """
[[scenario]]
name = "canonical"
kind = "two-sphere"
dim = 3
grid_points = [[3.0, 0.0, 0.0]]

[[scenario]]
name = "counterexample"
kind = "pure-binormal"
dim = 3
support = {center = [0.0, 0.0, 0.0], radius = 1.0}

[[scenario.measure]]
weight = 1.0
kind = "point"
location = [0.0, 0.0, 0.0]

[[scenario.measure]]
weight = -1.0
kind = "harmonic"
ball = {center = [0.0, 0.0, 0.0], radius = 1.0}
base = [0.0, 0.0, 0.0]
"""


class TestRun:
    def test_mixed_config_fails_overall(self, runner, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text(CONFIG)
        out = tmp_path / "out.json"
        res = invoke(runner, ["run", str(cfg), "--no-timestamp",
                              "--out", str(out)])
        assert res.exit_code == 2
        env = json.loads(out.read_text())
        by_name = {r["name"]: r for r in env["reports"]}
        assert by_name["canonical"]["pass"] is True
        assert by_name["counterexample"]["pass"] is False

    def test_byte_determinism(self, runner, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text(CONFIG)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        invoke(runner, ["run", str(cfg), "--no-timestamp", "--out", str(a)])
        invoke(runner, ["run", str(cfg), "--no-timestamp", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_parallel_matches_sequential(self, runner, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text(CONFIG)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        invoke(runner, ["run", str(cfg), "--no-timestamp", "--out", str(a)])
        invoke(runner, ["run", str(cfg), "--no-timestamp", "--parallel",
                        "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_key_rejected_by_name(self, runner, tmp_path):
        cfg = tmp_path / "bad.toml"
        cfg.write_text("""
[[scenario]]
kind = "two-sphere"
dim = 3
florp = 1
""")
        res = invoke(runner, ["run", str(cfg), "--no-timestamp"])
        assert res.exit_code == 1
        assert "florp" in res.output

    def test_unknown_scenario_kind_rejected(self, runner, tmp_path):
        cfg = tmp_path / "bad.toml"
        cfg.write_text('[[scenario]]\nkind = "nonsense"\n')
        res = invoke(runner, ["run", str(cfg)])
        assert res.exit_code == 1

    def test_dimension_mismatch_reported(self, runner, tmp_path):
        cfg = tmp_path / "bad.toml"
        cfg.write_text("""
[[scenario]]
kind = "pure-binormal"
dim = 3
support = {center = [0.0, 0.0, 0.0], radius = 1.0}

[[scenario.measure]]
weight = 1.0
kind = "point"
location = [0.0, 0.0]
""")
        res = invoke(runner, ["run", str(cfg)])
        assert res.exit_code == 1
        assert "dimension" in res.output and "measure[0]" in res.output

    def test_solver_scenario(self, runner, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("""
[[scenario]]
name = "disk laplace"
kind = "wos-laplace"
domain = "ball:0,0:1"
f1 = "z1^2"
point = [0.0, 0.0]
samples = 2000
seed = 7
""")
        out = tmp_path / "o.json"
        res = invoke(runner, ["run", str(cfg), "--no-timestamp",
                              "--out", str(out)])
        assert res.exit_code == 0
        env = json.loads(out.read_text())
        rep = env["reports"][0]["reports"][0]
        assert abs(rep["value"] - 0.5) < 0.1 and rep["samples_used"] == 2000

    def test_set_override_applies(self, runner, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("""
[[scenario]]
kind = "two-sphere"
dim = 2
""")
        out = tmp_path / "o.json"
        res = invoke(runner, ["run", str(cfg), "--no-timestamp",
                              "--set", "quad_order=96", "--out", str(out)])
        assert res.exit_code == 0
        env = json.loads(out.read_text())
        rep = env["reports"][0]["reports"][0]
        assert rep["metadata"]["quad_order"] == 96
