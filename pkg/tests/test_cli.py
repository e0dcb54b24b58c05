import json
import os
import subprocess
import sys

import pytest

from koenigs.cli import main

import oracles


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def cli(*argv, env=None):
    return subprocess.run(
        [sys.executable, "-m", "koenigs", *argv],
        capture_output=True,
        text=True,
        env={**os.environ, **(env or {})},
        timeout=600,
    )


def test_classify_quadratic(capsys):
    code, out, _ = run(capsys, "classify", "--map", "(1+z^2)/2")
    rep = json.loads(out)
    assert code == 0
    assert list(rep) == ["tool", "version", "command", "config", "results", "checks", "errors", "timing"]
    assert rep["results"]["type"] == "parabolic"
    assert rep["results"]["dw"] == [1.0, 0.0]
    assert rep["results"]["step"] == "zero"
    assert rep["timing"] is None


def test_parse_error_exit_and_offset(capsys):
    code, out, err = run(capsys, "classify", "--map", "z^")
    rep = json.loads(out)
    assert code == 2
    assert rep["errors"][0]["code"] == "parse"
    assert rep["errors"][0]["offset"] == 2
    assert rep["errors"][0]["flag"] == "--map"
    assert "parse error" in err


def test_usage_error(capsys):
    code, _, err = run(capsys, "classify")
    assert code == 2 and "usage error" in err
    code, _, _ = run(capsys, "frobnicate")
    assert code == 2


def test_analysis_error_exits_one(capsys):
    code, out, _ = run(capsys, "koenigs", "--map", oracles.UPPER_SHIFT, "--n", "64")
    assert code == 1
    assert json.loads(out)["errors"][0]["code"] == "precondition"


def test_slc(capsys):
    code, out, _ = run(capsys, "slc", "--phi", oracles.slit(1), "--psi", oracles.slit(2.5), "--method", "all")
    rep = json.loads(out)
    assert code == 0
    re, im = rep["results"]["c"]
    assert abs(complex(re, im) - 2.5) < 1e-5
    assert rep["results"]["disagreement"] < 1e-3
    assert all(c["passed"] for c in rep["checks"])


def test_slc_failing_check_exits_one(capsys):
    code, out, _ = run(capsys, "slc", "--phi", oracles.slit(1), "--psi", oracles.QUAD, "--method", "angular")
    rep = json.loads(out)
    assert code == 1
    assert rep["checks"][0]["name"] == "commutation" and not rep["checks"][0]["passed"]
    assert "not-commuting" in rep["results"]["flags"]


def test_step_and_koenigs(capsys):
    code, out, _ = run(capsys, "step", "--map", oracles.RIGHT_SHIFT, "--z0", "0.1+0.2i", "--n", "512")
    rep = json.loads(out)
    assert code == 0 and rep["results"]["decision"] == "positive"
    assert rep["results"]["z0"] == [0.1, 0.2]
    code, out, _ = run(capsys, "koenigs", "--map", oracles.slit(1), "--n", "256")
    rep = json.loads(out)
    assert code == 0 and rep["results"]["b_at_0"] == [0.0, 0.0]


def test_commute_example(capsys):
    code, out, _ = run(capsys, "commute", "--phi", "(1+z^2)/2", "--psi", "neg((1+z^2)/2)")
    res = json.loads(out)["results"]
    assert code == 0
    assert res["residual_at_0"] == pytest.approx(1.25)
    mean = complex(*res["koenigs_difference"]["mean"])
    assert abs(mean - 1) < 0.05


def test_semigroup(capsys):
    code, out, _ = run(capsys, "semigroup", "--h", "slit", "--theta", "0", "--embed", oracles.slit(0.75))
    res = json.loads(out)["results"]
    assert code == 0
    assert res["step"] == "zero"
    assert abs(res["embed"]["t0"] - 0.75) < 1e-8
    code, out, _ = run(capsys, "semigroup", "--h", "slit", "--theta", "1")
    assert code == 1
    assert json.loads(out)["errors"][0]["code"] == "domain"


def test_csv_and_files(capsys, tmp_path):
    out_path, plot = tmp_path / "r.csv", tmp_path / "p.csv"
    code, out, _ = run(capsys, "step", "--map", "(z+1)/2", "--n", "64", "--format", "csv",
                       "--out", str(out_path), "--emit-plot-data", str(plot))
    assert code == 0 and out == ""
    assert out_path.read_text().startswith("analysis,field,index,re,im,value\n")
    assert plot.read_text().startswith("index,distortion,q\n")


def test_classify_plot_has_orbit_and_margins(capsys, tmp_path):
    plot = tmp_path / "p.csv"
    run(capsys, "classify", "--map", oracles.slit(1), "--emit-plot-data", str(plot))
    series = {line.split(",")[0] for line in plot.read_text().splitlines()[1:]}
    assert series == {"orbit", "v_margin"}


def test_timing_is_opt_in(capsys):
    _, out, _ = run(capsys, "classify", "--map", "z/(2-z)", "--timing")
    assert json.loads(out)["timing"]["seconds"] >= 0


def test_reports_are_byte_identical():
    args = ("slc", "--phi", oracles.slit(1), "--psi", oracles.slit(0.5))
    a, b = cli(*args), cli(*args)
    assert a.returncode == 0
    assert a.stdout == b.stdout


def test_corpus_threads_do_not_change_report():
    one = cli("corpus")
    four = cli("corpus", env={"KOENIGS_THREADS": "4"})
    assert one.returncode == 0, one.stdout
    assert one.stdout == four.stdout
    rep = json.loads(one.stdout)
    assert all(c["passed"] for c in rep["checks"])
    assert [e["name"] for e in rep["results"]["entries"]][0] == "affine-half"


def test_bad_thread_count(capsys):
    os.environ["KOENIGS_THREADS"] = "many"
    try:
        code, _, _ = run(capsys, "corpus")
    finally:
        del os.environ["KOENIGS_THREADS"]
    assert code == 2


def test_corpus_failure_and_bad_file(capsys, tmp_path):
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps([{"name": "x", "expr": "(z+1)/2", "expected": {"multiplier": 0.25}}]))
    code, out, _ = run(capsys, "corpus", "--file", str(bad))
    assert code == 1
    bad.write_text("{")
    code, out, _ = run(capsys, "corpus", "--file", str(bad))
    assert code == 2
    assert json.loads(out)["errors"][0]["code"] == "corpus"


@pytest.mark.parametrize(
    "argv",
    [
        ("step", "--map", "z/2", "--n", "0"),
        ("classify", "--map", "z/2", "--n-max", "2000000"),
        ("slc", "--phi", "z", "--psi", "z", "--tol", "-1"),
        ("semigroup", "--h", "slit", "--t-max", "nan"),
        ("step", "--map", "z/2", "--z0", "abc"),
    ],
)
def test_config_bounds_are_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "usage error" in err
