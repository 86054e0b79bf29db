import csv
import io
import json
import math
import os

import pytest

from fockcrit import cli, minimizer, verify
from fockcrit.cli import UsageError, main, parse_n_values, parse_ws, render
from fockcrit.errors import ConvergenceError
from fockcrit.verify import CheckResult


def write_state(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(autouse=True)
def no_outdir(monkeypatch):
    monkeypatch.delenv(cli.OUTDIR_ENV, raising=False)


# -- argument parsing -------------------------------------------------------------------

def test_parse_n_values():
    assert parse_n_values("1,5,20") == [1.0, 5.0, 20.0]
    assert parse_n_values("0..3") == [0.0, 1.0, 2.0, 3.0]
    assert parse_n_values("1..2:0.25") == [1.0, 1.25, 1.5, 1.75, 2.0]
    assert parse_n_values("0.5, 2..3") == [0.5, 2.0, 3.0]
    assert len(parse_n_values("0..400")) == 401


@pytest.mark.parametrize("bad", ["", "a", "3..1", "1..2:0", "1,,2", "nan", "1..inf"])
def test_parse_n_values_rejects(bad):
    with pytest.raises(UsageError):
        parse_n_values(bad)


def test_parse_ws():
    assert parse_ws(["0.3,0.5", "0.7"]) == [0.3, 0.5, 0.7]
    assert parse_ws(None) == []
    for bad in (["0"], ["1"], ["1.2"], ["x"]):
        with pytest.raises(UsageError):
            parse_ws(bad)


# -- formats ------------------------------------------------------------------------------

def test_render_formats():
    cols = ("a", "b", "c")
    rows = [(1, 0.1, True), (2, math.nan, None)]
    rec = list(csv.reader(io.StringIO(render(cols, rows, "csv"))))
    assert rec == [["a", "b", "c"], ["1", "0.1", "true"], ["2", "nan", ""]]
    lines = [json.loads(l) for l in render(cols, rows, "jsonl").splitlines()]
    assert lines[0] == {"a": 1, "b": 0.1, "c": True} and lines[1]["b"] is None
    text = render(cols, rows, "text").splitlines()
    assert text[0].split() == ["a", "b", "c"] and len(text) == 3


def test_float_format_round_trips():
    x = 1 / 3
    assert float(cli.fmt_value(x)) == pytest.approx(x, rel=1e-15)
    assert cli.fmt_value(13.0346527190892) == "13.0346527190892"


# -- subcommands ---------------------------------------------------------------------------

def test_evaluate_binomial(tmp_path, capsys):
    p = write_state(tmp_path, {"kind": "binomial", "N": 200})
    code, out, _ = run(["evaluate", p, "--format", "jsonl"], capsys)
    assert code == 0
    rows = {r["criterion"] + str(r["w"] or ""): r for r in map(json.loads, out.splitlines())}
    assert rows["hyperbola"]["margin"] == pytest.approx(49.125, abs=1e-9) and rows["hyperbola"]["detected"]
    assert not rows["epr_sum"]["detected"] and not rows["covariance_ppt"]["detected"]
    assert rows["simple_sum"]["detected"]


def test_evaluate_custom_weights(tmp_path, capsys):
    p = write_state(tmp_path, {"kind": "fock_product", "n": 2, "m": 3})
    code, out, _ = run(["evaluate", p, "--w", "0.2,0.8", "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["w"] for r in rows if r["criterion"] == "weighted_sum"] == ["0.2", "0.8"]
    assert all(r["detected"] == "false" for r in rows)


def test_bounds_table(capsys):
    code, out, _ = run(["bounds", "--n", "0..400", "--w", "0.3,0.5,0.7", "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 401 * 3
    for w in ("0.3", "0.5", "0.7"):
        rhs = [float(r["hyperbola_rhs"]) for r in rows if r["w"] == w]
        assert all(b > a for a, b in zip(rhs, rhs[1:]))
    r200 = [r for r in rows if r["N"] == "200" and r["w"] == "0.5"][0]
    assert float(r200["f"]) == pytest.approx(13.0346527190892, abs=1e-12)
    assert float(r200["hyperbola_rhs"]) == 50.125


def test_minimize(capsys):
    code, out, _ = run(["minimize", "--n", "1,20", "--method", "both", "--format", "jsonl"], capsys)
    assert code == 0
    rows = [json.loads(l) for l in out.splitlines()]
    assert len(rows) == 4 and all(r["status"] == "ok" and r["gap"] >= 0 for r in rows)
    assert rows[2]["value"] == pytest.approx(3.9217372385391833, abs=1e-9)


def test_minimize_weighted_needs_direct(capsys):
    code, _, err = run(["minimize", "--n", "5", "--w", "0.3"], capsys)
    assert code == 2 and "direct" in err
    code, out, _ = run(["minimize", "--n", "5", "--w", "0.3", "--method", "direct", "--format", "jsonl"], capsys)
    assert code == 0 and json.loads(out)["value"] == pytest.approx(0.728091180513306, abs=1e-9)


def test_sample(capsys):
    code, out, _ = run(["sample", "--count", "50", "--seed", "4", "--format", "csv", "--threads", "1"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 50 and all(r["detected"] == "false" for r in rows)


def test_fig1_deterministic_bytes(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        code, _, err = run(["fig1", "--n", "50", "--count", "20", "--format", "csv", "--out", str(p)], capsys)
        assert code == 0 and "0 separable violations" in err
    assert a.read_bytes() == b.read_bytes()


def test_fig2_writes_amplitudes(tmp_path, capsys):
    out = tmp_path / "fig2.csv"
    code, _, err = run(["fig2", "--n", "1,20", "--format", "csv", "--out", str(out)], capsys)
    assert code == 0 and "R^2" in err
    amp = tmp_path / "fig2_amplitudes.csv"
    assert amp.exists() and amp.read_text().startswith("n,amplitude,gaussian_fit")
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert all(float(r["gap"]) >= 0 for r in rows)


def test_outdir_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.OUTDIR_ENV, str(tmp_path / "o"))
    code, out, _ = run(["bounds", "--n", "1", "--format", "jsonl"], capsys)
    assert code == 0 and out == ""
    assert json.loads((tmp_path / "o" / "bounds.jsonl").read_text())["N"] == 1


def test_atomic_write_leaves_no_temp(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("old")
    cli.atomic_write(p, "new")
    assert p.read_text() == "new" and os.listdir(tmp_path) == ["x.txt"]


def test_atomic_write_failure_keeps_old(tmp_path, monkeypatch):
    p = tmp_path / "x.txt"
    p.write_text("old")

    def fail(*a):
        raise OSError("disk full")

    monkeypatch.setattr(cli.os, "replace", fail)
    with pytest.raises(OSError):
        cli.atomic_write(p, "new")
    assert p.read_text() == "old" and os.listdir(tmp_path) == ["x.txt"]


# -- exit codes ------------------------------------------------------------------------------

def test_exit_io(tmp_path, capsys):
    code, _, err = run(["evaluate", str(tmp_path / "missing.json")], capsys)
    assert code == 1 and "I/O" in err


@pytest.mark.parametrize("argv", [
    [], ["nope"], ["bounds", "--n", "-1"], ["bounds", "--w", "1.5"], ["fig1", "--n", "1,2"],
    ["minimize", "--n", "0"], ["sample", "--count", "0"], ["sample", "--family", "bad"],
])
def test_exit_usage(argv, capsys):
    assert run(argv, capsys)[0] == 2


def test_exit_schema(tmp_path, capsys):
    p = write_state(tmp_path, {"kind": "binomial", "N": -3})
    code, out, err = run(["evaluate", p], capsys)
    assert code == 3 and "'N'" in err and out == ""


def test_exit_convergence(monkeypatch, capsys):
    def boom(T, *a, **k):
        raise ConvergenceError("forced", {})

    monkeypatch.setattr(minimizer, "solve_min_recurrence", boom)
    code, out, _ = run(["minimize", "--n", "3", "--format", "csv"], capsys)
    assert code == 4 and "error: forced" in out


def test_exit_verify_failure(monkeypatch, capsys):
    def fake(cfg, report=None):
        res = [CheckResult("kernel", True, "", 0.0), CheckResult("soundness", False, "1 hit", 0.0)]
        for r in res:
            report(r)
        return res

    monkeypatch.setattr(verify, "run_verify", fake)
    code, out, _ = run(["verify", "--quick"], capsys)
    assert code == 5 and "1/2 checks passed" in out and "FAIL  soundness" in out


def test_no_output_on_usage_error(tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert run(["bounds", "--n", "3..1", "--out", str(out)], capsys)[0] == 2
    assert not out.exists()
