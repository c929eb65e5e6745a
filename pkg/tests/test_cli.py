import csv
import json
import sys

import numpy as np
import pytest

import omstat.cli as cli
from omstat.acceptance import run_criterion
from omstat.cli import main, parse_grid
from omstat.oracle import oracle_table


def run(*argv):
    return main([str(a) for a in argv])


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def by_method(rows):
    out = {}
    for r in rows:
        out.setdefault(r["method"], []).append(r)
    return out


def test_parse_grid_forms():
    assert parse_grid("1,2.5") == [1.0, 2.5]
    assert parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_grid("log:1:100:3") == pytest.approx([1.0, 10.0, 100.0])
    assert parse_grid(3) == [3.0]
    assert parse_grid([1, 2]) == [1.0, 2.0]


def test_spectrum_files(tmp_path):
    out = tmp_path / "s"
    assert run("spectrum", "--lambda", "log:0.01:100:9", "--n-range", "0", "--out", out) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == sorted([f"spectrum_{m}.csv" for m in cli.METHODS["spectrum"]]
                           + ["spectrum_errors.csv", "failures.csv"])
    rows = read_rows(out / "spectrum_om0.csv")
    assert list(rows[0].keys()) == cli.COLUMNS
    assert max(float(r["rel_err"]) for r in rows) < 0.03
    lams = [float(r["lambda"]) for r in rows]
    assert lams == sorted(lams)
    cpt = read_rows(out / "spectrum_cpt.csv")
    assert all(float(r["rel_err"]) > 0.5 for r in cpt if float(r["lambda"]) >= 1)


def test_spectrum_harmonic_column(tmp_path):
    out = tmp_path / "s"
    assert run("spectrum", "--lambda", "0", "--n-range", "0:5", "--out", out) == 0
    for m in ("om0", "om2", "om3", "cpt", "oracle"):
        for r in read_rows(out / f"spectrum_{m}.csv"):
            assert float(r["rel_err"]) == pytest.approx(0.0, abs=1e-12)
    assert all(float(r["value"]) == 0.0 for r in read_rows(out / "spectrum_strong.csv"))


def test_missing_fields_are_empty(tmp_path):
    out = tmp_path / "s"
    assert run("spectrum", "--lambda", "1", "--n-range", "0", "--methods", "om0", "--out", out) == 0
    row = read_rows(out / "spectrum_om0.csv")[0]
    assert row["beta_or_x"] == "" and row["ref_value"] == "" and row["rel_err"] == ""


def test_rotator_examples(tmp_path):
    out = tmp_path / "r"
    assert run("rotator", "--x", "0.01,50", "--out", out) == 0
    rows = read_rows(out / "rotator.csv")
    f50 = [float(r["value"]) for r in rows if r["kind"] == "F" and float(r["beta_or_x"]) == 50]
    assert len(f50) == 3 and np.ptp(f50) < 1e-6
    z = {r["method"]: float(r["value"]) for r in rows
         if r["kind"] == "Z" and float(r["beta_or_x"]) == 0.01}
    assert z["ce1"] == pytest.approx(1.063 / 0.01 + 0.348, rel=0.01)


def test_rotator_uniform_error(tmp_path):
    out = tmp_path / "r"
    assert run("rotator", "--x", "log:0.01:10:60", "--methods", "ce0,oracle", "--out", out) == 0
    rows = [r for r in read_rows(out / "rotator.csv") if r["kind"] == "F" and r["method"] == "ce0"]
    assert max(float(r["rel_err"]) for r in rows) <= 0.1


def test_thermo_beta_one_slice(tmp_path):
    out = tmp_path / "t"
    assert run("qao-thermo", "--beta", "1", "--methods", "om0,om2,oracle", "--out", out) == 0
    vals = {}
    for r in read_rows(out / "qao-thermo.csv"):
        vals.setdefault(r["lambda"], {})[r["method"]] = float(r["value"])
    for d in vals.values():
        for a, b in (("om0", "om2"), ("om0", "oracle"), ("om2", "oracle")):
            assert abs(d[a] - d[b]) < 0.02


def test_thermo_harmonic_column(tmp_path):
    out = tmp_path / "t"
    assert run("qao-thermo", "--beta", "0.3,1,4", "--lambda", "0", "--out", out) == 0
    rows = read_rows(out / "qao-thermo.csv")
    assert {r["method"] for r in rows} == set(cli.METHODS["qao-thermo"]) | {"oracle8"}
    for r in rows:
        if r["method"] == "oracle8":
            continue
        beta = float(r["beta_or_x"])
        exact = np.log(2 * np.sinh(beta / 2)) / beta
        assert float(r["value"]) == pytest.approx(exact, rel=1e-8, abs=1e-12)


def test_thermo_ce0_grid(tmp_path):
    out = tmp_path / "t"
    assert run("qao-thermo", "--methods", "ce0,oracle", "--out", out, "--jobs", 2) == 0
    rows = [r for r in read_rows(out / "qao-thermo.csv") if r["method"] == "ce0"]
    assert len(rows) == 63
    assert max(float(r["rel_err"]) for r in rows) <= 0.1


def test_avg_energy_examples(tmp_path):
    out = tmp_path / "a"
    assert run("avg-energy", "--beta", "0.5,2", "--lambda", "0", "--out", out) == 0
    for r in read_rows(out / "avg-energy.csv"):
        if r["method"] == "oracle8":
            continue
        beta = float(r["beta_or_x"])
        assert float(r["value"]) == pytest.approx(0.5 / np.tanh(beta / 2), rel=1e-10)

    out = tmp_path / "b"
    assert run("avg-energy", "--out", out) == 0
    vals = {}
    for r in read_rows(out / "avg-energy.csv"):
        vals.setdefault((r["beta_or_x"], r["lambda"]), {})[r["method"]] = float(r["value"])
    for d in vals.values():
        assert abs(d["om0"] - d["ce0"]) / d["om0"] <= 0.1
    # the 8-level reference falls behind at high temperature, the full one does not
    hot = vals[("0.1", "1")]
    assert abs(hot["oracle8"] - hot["oracle"]) / hot["oracle"] > 0.05


def test_determinism_across_workers(tmp_path):
    args = ["qao-thermo", "--beta", "log:0.2:5:4", "--lambda", "0.5,2", "--format", "json"]
    assert run(*args, "--out", tmp_path / "one", "--jobs", 1) == 0
    assert run(*args, "--out", tmp_path / "four", "--jobs", 4) == 0
    a = (tmp_path / "one" / "qao-thermo.json").read_bytes()
    b = (tmp_path / "four" / "qao-thermo.json").read_bytes()
    assert a == b
    doc = json.loads(a)
    assert set(doc) == {"meta", "rows"}
    assert "rows_sha256" in doc["meta"]


def test_refuse_then_overwrite(tmp_path):
    out = tmp_path / "r"
    assert run("rotator", "--x", "1", "--out", out) == 0
    (out / "stale.txt").write_text("old")
    assert run("rotator", "--x", "2", "--out", out) == 1
    assert (out / "stale.txt").exists()
    assert run("rotator", "--x", "2", "--out", out, "--overwrite") == 0
    assert not (out / "stale.txt").exists()
    assert float(read_rows(out / "rotator.csv")[0]["beta_or_x"]) == 2.0
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".")]


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"x": [0.5, 1.0], "methods": ["ce0", "oracle"]}))
    out = tmp_path / "r"
    assert run("rotator", "--config", cfg, "--out", out) == 0
    xs = {float(r["beta_or_x"]) for r in read_rows(out / "rotator.csv")}
    assert xs == {0.5, 1.0}
    out2 = tmp_path / "r2"
    assert run("rotator", "--config", cfg, "--x", "3", "--out", out2) == 0
    assert {float(r["beta_or_x"]) for r in read_rows(out2 / "rotator.csv")} == {3.0}


@pytest.mark.parametrize("argv", [
    ["rotator", "--methods", ""],
    ["rotator", "--methods", "om3"],
    ["rotator", "--x", "-1"],
    ["qao-thermo", "--beta", "0"],
    ["qao-thermo", "--lambda", "-2"],
    ["qao-thermo", "--mu", "-0.5"],
])
def test_validation_errors(tmp_path, argv):
    out = tmp_path / "o"
    assert run(*argv, "--out", out) == 1
    assert not out.exists()


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"temperature": 3}))
    assert run("rotator", "--config", cfg, "--out", tmp_path / "o") == 1


def test_failures_logged_or_fatal(tmp_path):
    out = tmp_path / "f"
    assert run("rotator", "--x", "1e-9", "--out", out) == 0
    fails = read_rows(out / "failures.csv")
    assert any(f["code"] == "slow-convergence" for f in fails)
    for r in read_rows(out / "rotator.csv"):
        assert np.isfinite(float(r["value"]))
        assert r["rel_err"] == ""
    strict = tmp_path / "g"
    assert run("rotator", "--x", "1e-9", "--out", strict, "--strict") == 2
    assert not strict.exists()


def test_module_entry_point(tmp_path):
    import subprocess

    res = subprocess.run([sys.executable, "-m", "omstat", "rotator", "--x", "1",
                          "--out", str(tmp_path / "m")], capture_output=True)
    assert res.returncode == 0


def test_verify_only(tmp_path, capsys):
    assert run("verify", "--only", "3,6", "--out", tmp_path / "v") == 0
    report = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert [c["id"] for c in report["criteria"]] == [3, 6]
    assert report["passed"] is True
    assert run("verify", "--only", "99") == 1


def test_verify_reports_failure(capsys):
    # criterion 11 has a known failing half; the exit status must say so
    assert run("verify", "--only", "11") == 3
    assert json.loads(capsys.readouterr().out)["passed"] is False


def _mutate_cubic(monkeypatch):
    from omstat.qao import _level_sums, solve_depressed_cubic

    def omega_5(params, n):
        s1, s2 = _level_sums(n)
        w = solve_depressed_cubic(params.stiffness, 5.0 * params.lam * s2 / s1)
        return w if np.ndim(n) else float(w)

    for name, mod in list(sys.modules.items()):
        if name.startswith("omstat") and hasattr(mod, "omega_n"):
            monkeypatch.setattr(mod, "omega_n", omega_5)
    oracle_table.cache_clear()


def test_mutation_breaks_use_bound(monkeypatch):
    _mutate_cubic(monkeypatch)
    try:
        assert run_criterion(3).passed
        assert not run_criterion(1).passed
    finally:
        oracle_table.cache_clear()


def test_mutation_caught_by_stationarity(monkeypatch):
    import omstat.qao as qao
    from omstat.om import optimize_omega

    _mutate_cubic(monkeypatch)
    try:
        p = qao.QaoParams(1.0)
        assert run_criterion(3).passed
        assert abs(qao.omega_n(p, 0) - optimize_omega(qao.qao_provider(p), 0)) > 1e-2
    finally:
        oracle_table.cache_clear()
