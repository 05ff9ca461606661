import json

import numpy as np
import pytest

from partialid.cli import main, parse_args
from partialid.distribution import DiscreteDistribution
from partialid.dsl import resolve_graph
from partialid.oracle import ScmSamplerConfig, sample_scm


def run(capsys, *argv):
    rc = main(list(argv))
    cap = capsys.readouterr()
    return rc, cap.out, cap.err


@pytest.fixture
def iv_table(tmp_path, iv):
    d = sample_scm(iv, ScmSamplerConfig(seed=9)).observed_joint()
    path = tmp_path / "iv.csv"
    d.to_csv(path)
    return path, d


def test_project_text_and_json(capsys):
    rc, out, _ = run(capsys, "project", "--graph", "iv")
    assert rc == 0
    assert out.splitlines() == ["Z -> A", "A -> Y", "A <-> Y"]
    rc, out, _ = run(capsys, "project", "--graph", "sequential", "--format", "json")
    doc = json.loads(out)
    assert ["A1", "Y1"] in doc["bidirected"] and doc["manifest"]["command"] == "project"


def test_project_latex(capsys):
    rc, out, _ = run(capsys, "project", "--graph", "iv", "--format", "latex")
    assert r"A \leftrightarrow Y" in out


def test_bound_text(capsys):
    rc, out, _ = run(capsys, "bound", "--graph", "iv", "--target", "Y(A=1)=1", "--instrument", "Z", "--upper")
    assert rc == 0
    assert out.startswith("lower: ") and "\nupper: " in out
    assert "max" in out


def test_bound_trace_and_formula(capsys):
    rc, out, _ = run(capsys, "bound", "--graph", "iv", "--target", "Y(A=1)=1", "--instrument", "Z",
                     "--trace", "--notation", "formula")
    assert rc == 0 and "P(" in out and "|" in out


def test_bound_eval_matches_evaluate(capsys, tmp_path, iv_table):
    path, _ = iv_table
    rc, out, _ = run(capsys, "bound", "--graph", "iv", "--target", "Y(A=1)=1", "--instrument", "Z",
                     "--upper", "--format", "json", "--eval", str(path))
    assert rc == 0
    doc = json.loads(out)
    lo, hi = doc["values"]["lower"], doc["values"]["upper"]
    assert 0 <= lo <= hi <= 1
    expr_file = tmp_path / "bound.json"
    expr_file.write_text(out)
    rc, out, _ = run(capsys, "evaluate", "--graph", "iv", "--expr", str(expr_file), "--dist", str(path), "--format", "json")
    assert rc == 0
    assert json.loads(out)["values"] == pytest.approx({"lower": lo, "upper": hi})


def test_bound_json_is_byte_identical(capsys):
    argv = ("bound", "--graph", "ivcov", "--target", "Y(A=0)=0", "--instrument", "Z", "--upper", "--format", "json")
    first = run(capsys, *argv)[1]
    second = run(capsys, *argv)[1]
    assert first == second
    assert "timestamp" not in first


def test_bound_subset_and_trivial(capsys):
    rc, out, _ = run(capsys, "bound", "--graph", "inclusive_frontdoor", "--target", "Y(A1=1,A2=1)=1", "--fixed", "A2")
    assert rc == 0 and out.startswith("lower: ")
    rc, out, _ = run(capsys, "bound", "--graph", "inclusive_frontdoor", "--target", "Y(A1=1,A2=1)=1", "--trivial")
    assert rc == 0


def test_constraints_and_check(capsys, tmp_path):
    rc, out, _ = run(capsys, "constraints", "--graph", "iv", "--instrument", "Z", "--treatment", "A", "--outcome", "Y")
    assert rc == 0 and out.startswith("4 constraints")
    # mass on (z=0, a=0, y=0) and (z=1, a=0, y=1) breaks the instrumental inequality
    bad = tmp_path / "bad.csv"
    bad.write_text("Z,A,Y,prob\n0,0,0,0.5\n1,0,1,0.5\n")
    rc, out, _ = run(capsys, "constraints", "--graph", "iv", "--instrument", "Z", "--treatment", "A",
                     "--outcome", "Y", "--check", str(bad))
    assert rc == 0 and "violated" in out
    rc, out, _ = run(capsys, "constraints", "--graph", "iv", "--instrument", "Z", "--treatment", "A",
                     "--outcome", "Y", "--check", str(bad), "--format", "json")
    doc = json.loads(out)
    assert doc["check"]["violations"] and doc["check"]["min_slack"] < 0


def test_verify(capsys):
    rc, out, _ = run(capsys, "verify", "--graph", "iv", "--target", "Y(A=1)=1", "--instrument", "Z",
                     "--treatment", "A", "--outcome", "Y", "--n", "30", "--seed", "1", "--format", "json")
    assert rc == 0
    doc = json.loads(out)
    assert doc["bounds"]["contained"] == doc["bounds"]["checked"] == 30
    assert doc["constraints"]["violations"] == 0
    assert doc["manifest"]["seed"] == 1


def test_simulate_outdir(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("PARTIALID_OUTDIR", str(tmp_path))
    argv = ("simulate", "--graph", "ivcov", "--n", "20", "--seed", "3", "--out", "sub/w.csv")
    rc, out, _ = run(capsys, *argv)
    assert rc == 0
    csv = tmp_path / "sub" / "w.csv"
    side = tmp_path / "sub" / "w.csv.manifest.json"
    assert csv.read_text().startswith("corr,width,excludes_zero\n")
    meta = json.loads(side.read_text())
    assert meta["manifest"]["seed"] == 3
    first = (csv.read_bytes(), side.read_bytes())
    run(capsys, *argv)
    assert (csv.read_bytes(), side.read_bytes()) == first


@pytest.mark.parametrize(
    "argv",
    [
        ("project",),
        ("bound", "--graph", "iv"),
        ("bound", "--graph", "iv", "--target", "Y(A=1)=1", "--fixed", "A", "--trivial"),
        ("verify", "--graph", "iv", "--target", "Y(A=1)=1", "--seed", "1", "--treatment", "A"),
        ("simulate", "--graph", "iv", "--seed", "x"),
        ("constraints", "--graph", "iv", "--instrument", "Z", "--outcome", "Y", "--max-size", "-1"),
        ("frobnicate",),
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == 2


@pytest.mark.parametrize(
    "argv, needle",
    [
        (("project", "--graph", "nope.cg"), "error:"),
        (("bound", "--graph", "iv", "--target", "Y(B=1)=1", "--instrument", "Z"), "B"),
        (("bound", "--graph", "iv", "--target", "Y(A=1)=1", "--instrument", "Z", "--eval", "missing.csv"), "error:"),
        (("constraints", "--graph", "iv", "--instrument", "Y", "--treatment", "A", "--outcome", "Z"), "error:"),
    ],
)
def test_domain_errors_exit_1(capsys, argv, needle):
    rc, out, err = run(capsys, *argv)
    assert rc == 1
    assert err.startswith("error:") and needle in err
    assert "Traceback" not in err


def test_verbose_shows_traceback(capsys):
    rc, _, err = run(capsys, "project", "--graph", "nope.cg", "--verbose")
    assert rc == 1 and "Traceback" in err


def test_graph_file(capsys, tmp_path):
    p = tmp_path / "g.cg"
    p.write_text("node Z; node A; node Y; Z -> A; A -> Y; A <-> Y;\n")
    rc, out, _ = run(capsys, "project", "--graph", str(p))
    assert rc == 0 and "A <-> Y" in out


def test_parse_args_returns_command():
    cmd = parse_args(["project", "--graph", "iv"])
    assert cmd.name == "project" and cmd.args.format == "text"
