import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from vck import io
from vck.cli import main
from vck.core import gen_kernel

SCHEMA = json.loads(resources.files("vck").joinpath("report_schema.json").read_text())


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def report(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    assert code == 0, err
    rep = json.loads(out)
    jsonschema.validate(rep, SCHEMA)
    return rep


@pytest.fixture
def files(tmp_path, capsys):
    p = lambda name: tmp_path / name
    assert run(capsys, "gen", "--kind", "triangle", "--n", 16, "--out", p("tri.csv"))[0] == 0
    assert run(capsys, "gen", "--kind", "smooth", "--n", 16, "--out", p("sm.csv"))[0] == 0
    assert run(capsys, "gen", "--what", "set", "--kind", "diagonal", "--n", 8, "--out", p("diag.csv"))[0] == 0
    assert run(capsys, "gen", "--what", "weights", "--kind", "random", "--n", 16, "--out", p("w.csv"))[0] == 0
    return p


class TestReports:
    def test_defect_example(self, tmp_path, capsys):
        f = tmp_path / "f.csv"
        run(capsys, "gen", "--kind", "triangle", "--n", 128, "--out", f)
        rep = report(capsys, "defect", f, "--blocks", "2,4,8,16", "--restarts", 2)
        taus = [e["tau"] for e in rep["results"]["profile"]]
        assert len(taus) == 4 and all(a >= b for a, b in zip(taus, taus[1:]))
        assert rep["results"]["nonincreasing"] is True
        assert rep["inputs"][0]["sha256"] == io.sha256(f)

    def test_thickness_example(self, files, capsys):
        rep = report(capsys, "thickness", "--set", files("diag.csv"))
        assert rep["results"]["value"] == 1.0
        assert abs(rep["witnesses"]["certificate"]["gap"]) <= 1e-8
        assert rep["results"]["product_measure"] == 0.125
        assert report(capsys, "thickness", files("diag.csv"))["results"]["value"] == 1.0

    def test_trace_example(self, tmp_path, capsys):
        f = tmp_path / "xy.csv"
        run(capsys, "gen", "--kind", "smooth", "--name", "xy", "--n", 256, "--out", f)
        rep = report(capsys, "trace", f, "--plan", "diagonal")
        assert abs(rep["results"]["value"] - 1 / 3) < 0.01
        assert rep["results"]["plan_class"] == "bistochastic"

    def test_every_command_validates(self, files, tmp_path, capsys):
        s1, s2 = tmp_path / "a.csv", tmp_path / "b.json"
        cmds = [
            ("tau", files("tri.csv"), files("sm.csv")),
            ("norm", files("sm.csv"), "--weights-x", files("w.csv")),
            ("trace", files("sm.csv"), "--plan", "product"),
            ("fit-step", files("sm.csv"), "--nx", 3, "--restarts", 2),
            ("rank-fit", files("sm.csv"), "--rank", 2),
            ("compactness", files("sm.csv"), "--eps", 0.3),
            ("compactness", files("tri.csv"), "--eps", 0.1, "--net-budget", 2),
            ("classify", files("tri.csv"), "--blocks", "2,4", "--levels", 2, "--restarts", 2),
            ("sample-md", files("sm.csv"), "--trials", 50, "--out", s1),
            ("sample-md", files("tri.csv"), "--trials", 50, "--out", s2),
            ("compare-md", s1, s2, "--permutations", 20),
            ("random-points", files("sm.csv"), "--eps", 0.3, "--N", 8, "--m", 40),
            ("restrict-metric", "--n", 4),
            ("gen", "--what", "plan", "--kind", "vertical_line", "--n", 3),
        ]
        for argv in cmds:
            rep = report(capsys, *argv)
            assert rep["command"] == argv[0] and rep["schema"] == "vck/1"

    def test_classify_wording(self, files, capsys):
        rep = report(capsys, "classify", files("tri.csv"), "--blocks", "2,4", "--levels", 1)
        assert rep["results"]["verdict"] == "defect profile consistent with failure of virtual continuity"
        rep = report(capsys, "classify", files("sm.csv"), "--blocks", "2,4,8", "--levels", 1,
                     "--threshold", 0.3)
        assert rep["results"]["verdict"] == "defect profile consistent with virtual continuity"

    def test_restrict_metric_values(self, capsys):
        res = report(capsys, "restrict-metric", "--n", 6)["results"]
        # mean |v - v'| over a 6-point grid of a vertical line
        assert res["restricted_integral"] == pytest.approx((36 - 1) / (3 * 36), abs=1e-12)
        assert res["plan_class"] == "bistochastic" and res["plan_me_norm"] == pytest.approx(1.0)
        assert res["markov_preserves_constants"] is True
        assert res["product_integral"] > res["restricted_integral"]


class TestExitCodes:
    def test_usage(self, capsys):
        code, _, err = run(capsys, "nope")
        assert code == 1 and err.startswith("error: usage:") and err.count("\n") == 1
        assert run(capsys, "gen", "--kind", "triangle")[0] == 1

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "norm", tmp_path / "missing.csv")
        assert code == 1 and err.startswith("error: io:")

    def test_bad_weights(self, files, tmp_path, capsys):
        w = tmp_path / "bad_w.csv"
        w.write_text("0.5\n0\n" + "0.1\n" * 14)
        code, out, err = run(capsys, "norm", files("sm.csv"), "--weights-x", w)
        assert code == 2 and "nonpositive weight at index 1" in err and out == ""

    def test_bad_mask(self, tmp_path, capsys):
        z = tmp_path / "z.csv"
        z.write_text("0,2\n1,0\n")
        assert run(capsys, "thickness", "--set", z)[0] == 2

    def test_non_semimetric(self, tmp_path, capsys):
        m = tmp_path / "m.csv"
        d = np.ones((4, 4)) - np.eye(4)
        d[0, 3] = d[3, 0] = 5.0
        io.write_matrix(m, d)
        code, _, err = run(capsys, "restrict-metric", "--n", 2, "--metric", m)
        assert code == 2 and "triangle" in err

    def test_certificate_failure_exits_3(self, files, capsys, monkeypatch):
        from vck import cli
        from vck.thickness import ThicknessCertificate

        real = cli.thickness

        def broken(*a, **k):
            c = real(*a, **k)
            return ThicknessCertificate(c.value, c.fractional, c.integral, c.dual.scaled(0.5), c.gap)

        monkeypatch.setattr(cli, "thickness", broken)
        code, out, err = run(capsys, "thickness", files("diag.csv"), "--json")
        assert code == 3 and out == "" and err.startswith("error: certificate:")


class TestRoundTrip:
    def test_kernel_csv_bit_identical(self, tmp_path):
        f = np.random.default_rng(0).normal(size=(7, 5)) / 3
        io.write_matrix(tmp_path / "f.csv", f)
        assert np.array_equal(io.read_matrix(tmp_path / "f.csv"), f)

    def test_header(self, tmp_path, capsys):
        p = tmp_path / "h.csv"
        p.write_text("a,b\n1,0\n0,1\n")
        assert report(capsys, "thickness", p, "--header")["results"]["value"] == 1.0

    def test_weights_exact(self, tmp_path):
        io.write_weights(tmp_path / "w.csv", [0.1, 0.2, 0.7])
        X = io.read_weights(tmp_path / "w.csv")
        assert X.denominator == 10

    def test_norm_witness_files(self, files, tmp_path, capsys):
        prefix = tmp_path / "cert"
        rep = report(capsys, "norm", files("sm.csv"), "--out", prefix)
        a = np.loadtxt(f"{prefix}.a.csv")
        b = np.loadtxt(f"{prefix}.b.csv")
        assert a.tolist() == rep["witnesses"]["certificate"]["primal"]["a"]
        assert b.tolist() == rep["witnesses"]["certificate"]["primal"]["b"]
        h = report(capsys, "me-norm", f"{prefix}.h.csv", "--shape", "16,16")
        assert h["results"]["value"] <= 1 + 1e-9

    def test_thickness_dual_plan_reread(self, files, tmp_path, capsys):
        out = tmp_path / "dual.csv"
        report(capsys, "thickness", files("diag.csv"), "--out", out)
        plan = io.read_plan(out, (8, 8))
        assert plan.total_mass == pytest.approx(1.0)
        rep = report(capsys, "trace", files("diag.csv"), "--plan", out)
        assert rep["results"]["value"] == pytest.approx(1.0)

    def test_fit_step_artifacts(self, files, tmp_path, capsys):
        js, csv = tmp_path / "s.json", tmp_path / "s.csv"
        r1 = report(capsys, "fit-step", files("sm.csv"), "--nx", 4, "--restarts", 2, "--out", js)
        report(capsys, "fit-step", files("sm.csv"), "--nx", 4, "--restarts", 2, "--out", csv)
        tau = report(capsys, "tau", files("sm.csv"), csv)["results"]["value"]
        assert tau == r1["results"]["tau"]

    def test_md_round_trip(self, files, tmp_path, capsys):
        for name in ("s.csv", "s.json"):
            p = tmp_path / name
            report(capsys, "sample-md", files("sm.csv"), "--trials", 20, "--seed", 3, "--out", p)
            back = io.read_md(p)
            want = io.read_md(p)
            assert np.array_equal(back.matrices, want.matrices)
        a, b = io.read_md(tmp_path / "s.csv"), io.read_md(tmp_path / "s.json")
        assert np.array_equal(a.matrices, b.matrices)

    def test_defect_csv(self, files, tmp_path, capsys):
        out = tmp_path / "d.csv"
        rep = report(capsys, "defect", files("tri.csv"), "--blocks", "2,4", "--restarts", 2, "--out", out)
        rows = [line.split(",") for line in out.read_text().splitlines()]
        assert [float(t) for _, t in rows] == [e["tau"] for e in rep["results"]["profile"]]

    def test_seeded_reports_reproduce(self, files, capsys):
        argv = ("random-points", files("sm.csv"), "--eps", 0.3, "--N", 8, "--m", 40, "--seed", 11)
        a, b = report(capsys, *argv), report(capsys, *argv)
        a.pop("runtimeMs"), b.pop("runtimeMs")
        assert a == b and a["seed"] == 11


def test_gen_matches_library(tmp_path, capsys):
    p = tmp_path / "k.csv"
    run(capsys, "gen", "--kind", "lowrank", "--r", 2, "--n", 6, "--seed", 5, "--out", p)
    assert np.array_equal(io.read_matrix(p), gen_kernel("lowrank", 6, r=2, seed=5))
