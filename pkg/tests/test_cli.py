import json
import subprocess
import sys

import numpy as np
import pytest

from splineflow import fileio
from splineflow.cli import main
from splineflow.flow_model import Flow


def run(*argv):
    return main([str(a) for a in argv])


def body(path):
    return [l for l in path.read_text().splitlines() if not l.startswith("#")]


class TestGen:
    def test_uniform(self, tmp_path):
        out = tmp_path / "f.csv"
        assert run("gen", "--field", "uniform", "--M", 1, "--S", 4, "--dt", 1, "-o", out) == 0
        rows = body(out)
        assert len(rows) == 4
        xs = [float(r.split(",")[2]) for r in rows]
        np.testing.assert_allclose(xs, [0, 1, 2, 3], atol=1e-12)

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert run("gen", "--field", "vortex", "--M", 100, "--S", 13, "--seed", 7, "-o", out) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_strict_shape_error(self, tmp_path, capsys):
        assert run("gen", "--S", 6, "--strict", "-o", tmp_path / "x.csv") == 4
        assert "ShapeError" in capsys.readouterr().err

    def test_binary(self, tmp_path):
        out = tmp_path / "f.bin"
        assert run("gen", "--field", "hill", "--M", 3, "--N", 2, "--format", "bin", "-o", out) == 0
        assert fileio.read_flow(out).S == 7

    def test_stdout(self, capsysbinary):
        assert run("gen", "--M", 1, "--S", 4) == 0
        assert capsysbinary.readouterr().out.startswith(b"#splineflow-flow v1")

    def test_usage_errors(self, capsys):
        assert run("gen", "--bogus") == 2
        assert run("gen", "--alpha", "0.7", "--beta", "0.7") == 2
        assert run("gen", "--M", 0) == 2

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"field": "vortex", "M": 3, "S": 7, "seed": 9}))
        out = tmp_path / "f.csv"
        assert run("gen", "--config", cfg, "-o", out) == 0
        flow = fileio.read_flow(out)
        assert (flow.M, flow.S, flow.dims) == (3, 7, 2)
        assert fileio.read_config(out)["seed"] == 9
        # command line wins over the file
        assert run("gen", "--config", cfg, "--M", 5, "-o", out) == 0
        assert fileio.read_flow(out).M == 5

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        assert run("gen", "--config", cfg) == 3
        cfg.write_text(json.dumps({"nonsense": 1}))
        assert run("gen", "--config", cfg) == 2


class TestFitEval:
    @pytest.fixture
    def collinear(self, tmp_path):
        out = tmp_path / "line.csv"
        run("gen", "--field", "uniform", "--M", 1, "--S", 7, "--dt", 1, "-o", out)
        return out

    def test_fit_rows(self, collinear, tmp_path):
        out = tmp_path / "c.csv"
        assert run("fit", collinear, "--raw-u", "-o", out) == 0
        rows = [list(map(float, r.split(","))) for r in body(out)]
        first = [r for r in rows if r[:4] == [0, 0, 1, 0]][0]
        np.testing.assert_allclose(first[4:], [-2, 0, 3, 0], atol=1e-9)
        assert run("fit", collinear, "-o", out) == 0
        rows = [list(map(float, r.split(","))) for r in body(out)]
        first = [r for r in rows if r[:4] == [0, 0, 1, 0]][0]
        np.testing.assert_allclose(first[4:], [-1, 0, 2, 0], atol=1e-9)

    def test_convention_header(self, collinear, tmp_path):
        out = tmp_path / "c.csv"
        assert run("fit", collinear, "--convention", "paper-literal", "-o", out) == 0
        assert "conv=paper_literal" in out.read_text().splitlines()[0]

    def test_corrupted_header(self, collinear, tmp_path, capsys):
        text = collinear.read_text().replace("#splineflow-flow v1", "#splineflow-flw v1")
        collinear.write_text(text)
        assert run("fit", collinear, "-o", tmp_path / "c.csv") == 3
        assert ":1:" in capsys.readouterr().err

    def test_relaxed_truncation(self, tmp_path, capsys):
        flow_path = tmp_path / "f.csv"
        assert run("gen", "--M", 2, "--S", 9, "--relaxed", "-o", flow_path) == 0
        assert run("fit", flow_path, "-o", tmp_path / "c.csv") == 4
        assert run("fit", flow_path, "--relaxed", "-o", tmp_path / "c.csv") == 0
        assert "trailing" in capsys.readouterr().err
        assert fileio.read_coeffs(tmp_path / "c.csv").N == 2

    def test_eval_points(self, tmp_path):
        f, c, s = tmp_path / "f.csv", tmp_path / "c.csv", tmp_path / "s.csv"
        assert run("gen", "--field", "vortex", "--M", 3, "--N", 2, "-o", f) == 0
        assert run("fit", f, "-o", c) == 0
        assert run("eval", c, "--V", 10, "-o", s) == 0
        snap = fileio.read_snapshot_csv(s)
        assert snap.points.shape == (3, 61, 3)
        assert run("eval", c, "--V", 1, "-o", s) == 0
        snap = fileio.read_snapshot_csv(s)
        assert snap.n_points == 7
        flow = fileio.read_flow(f)
        np.testing.assert_allclose(snap.points[:, ::3], flow.points[:, ::3], atol=1e-12)

    def test_constant_flow(self, tmp_path):
        f, c, s = tmp_path / "f.csv", tmp_path / "c.csv", tmp_path / "s.csv"
        fileio.write_flow_csv(Flow(np.full((2, 7, 3), 4.25)), f)
        assert run("fit", f, "-o", c) == 0
        assert run("eval", c, "--V", 5, "-o", s) == 0
        coords = {r.split(",", 2)[2] for r in body(s)}
        assert len(coords) == 1

    def test_incomplete_coeffs(self, tmp_path):
        f, c = tmp_path / "f.csv", tmp_path / "c.csv"
        run("gen", "--M", 2, "--N", 2, "-o", f)
        run("fit", f, "-o", c)
        lines = c.read_text().splitlines()
        c.write_text("\n".join(lines[:-3]) + "\n")
        assert run("eval", c, "-o", tmp_path / "s.csv") == 4

    def test_binary_chain(self, tmp_path):
        f, c, s = tmp_path / "f.bin", tmp_path / "c.bin", tmp_path / "s.csv"
        assert run("gen", "--field", "hill", "--M", 4, "--N", 3, "--format", "bin", "-o", f) == 0
        assert run("fit", f, "--format", "bin", "-o", c) == 0
        assert run("eval", c, "--V", 4, "-o", s) == 0
        assert fileio.read_snapshot_csv(s).n_points == 37


class TestPipeline:
    def test_matches_separate_steps(self, tmp_path):
        f, c, s1, s2 = (tmp_path / n for n in ("f.csv", "c.csv", "s1.csv", "s2.csv"))
        args = ("--field", "vortex", "--M", 8, "--N", 3, "--seed", 2)
        assert run("pipeline", *args, "--V", 6, "--p", 4, "--flow-out", f, "--coeffs-out", c, "-o", s1) == 0
        assert run("eval", c, "--V", 6, "-o", s2) == 0
        assert fileio.read_snapshot_csv(s1) == fileio.read_snapshot_csv(s2)

    def test_p_exceeds_m(self, tmp_path):
        assert run("pipeline", "--M", 2, "--p", 4, "-o", tmp_path / "s.csv") == 2


class TestCalculators:
    def test_cfl(self, capsys, tmp_path):
        csv = tmp_path / "cfl.csv"
        assert run("cfl", "--space-step", 0.5, "--speed", 50, "--time-step", 0.1, "--csv", csv) == 0
        out = capsys.readouterr().out
        assert "max_time_step = 0.01 s" in out
        assert "min_space_step = 5.0 cm" in out
        assert "max_time_step,0.01,s" in csv.read_text()

    def test_cfl_errors(self):
        assert run("cfl", "--space-step", 1, "--speed", 0) == 2
        assert run("cfl", "--speed", 1) == 2

    def test_equiv(self, capsys):
        assert run("equiv", "--L", 300, "--N", 100, "--V", 10, "--speed", 30) == 0
        out = capsys.readouterr().out
        assert f"dt_splines = {1 / 30!r} s" in out
        assert f"dt_fd = {1 / 300!r} s" in out
        assert "ratio = 10.0" in out


class TestCompare:
    def test_uniform(self, tmp_path):
        out = tmp_path / "m.csv"
        pairs = tmp_path / "p.csv"
        assert run("compare", "--field", "uniform", "--M", 3, "--N", 4, "--V", 10,
                   "-o", out, "--pairs", pairs) == 0
        metrics = {r.split(",")[0]: r.split(",")[1] for r in body(out)[1:]}
        assert float(metrics["rel_rms"]) <= 0.1
        assert int(metrics["points_per_trajectory"]) == 121
        assert "truth" in pairs.read_text() and "spline" in pairs.read_text()

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert run("compare", "--field", "vortex", "--M", 4, "--N", 4, "--seed", 3, "-o", out) == 0
        assert a.read_bytes() == b.read_bytes()


class TestBench:
    def test_small(self, tmp_path):
        out = tmp_path / "bench.csv"
        assert run("bench", "--M-list", "64,128", "--p-list", "1,2", "--N", 5, "--V", 4,
                   "--stage", "all", "--repeats", 1, "-o", out) == 0
        lines = body(out)
        assert lines[0] == ("p,M,N,V,stage,time_execution_s,time_cpu_s,time_overhead_s,speedup,"
                            "flops_instrumented,flops_exact")
        rows = [dict(zip(lines[0].split(","), l.split(","))) for l in lines[1:]]
        assert len(rows) == 2 * 3 * 2
        for r in rows:
            assert r["flops_instrumented"] == r["flops_exact"]
            if r["p"] == "1":
                assert float(r["speedup"]) == 1.0


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "splineflow", "equiv", "--L", "300", "--N", "100",
                          "--V", "10", "--speed", "30"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "heuristic equivalence" in res.stdout
