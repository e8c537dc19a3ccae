import json

import numpy as np
import pytest

from dccatest.asymptotics import load_covtab, save_covtab
from dccatest.cli import main


@pytest.fixture(scope="module")
def table_file(tmp_path_factory):
    code = main(["tabulate", "--grid", "0.5:0.9:0.2", "--n-tab", "128",
                 "--ratios", "0.1,0.3,0.6,1.0",
                 "--out", str(tmp_path_factory.mktemp("tab") / "t.covtab")])
    assert code == 0
    # Recover the path written above.
    base = tmp_path_factory.getbasetemp()
    hits = list(base.glob("tab*/t.covtab"))
    return str(hits[0])


def _simulate(tmp_path, name="pair.csv", extra=()):
    out = str(tmp_path / name)
    code = main(["simulate", "--kind", "bfgn", "--N", "4000", "--H", "0.7",
                 "--G", "0.8", "--rho", "0.4", "--seed", "1", "--out", out,
                 *extra])
    assert code == 0
    return out


def test_simulate_deterministic(tmp_path):
    a = _simulate(tmp_path, "a.csv")
    b = _simulate(tmp_path, "b.csv")
    assert open(a).read() == open(b).read()


def test_simulate_rejects_bad_rho(tmp_path):
    code = main(["simulate", "--kind", "bfgn", "--N", "4000",
                 "--rho", "1.5", "--out", str(tmp_path / "x.csv")])
    assert code == 2


def test_analyze_identical_series_rejects(tmp_path, table_file, capsys):
    data = _simulate(tmp_path)
    out = str(tmp_path / "report.json")
    code = main(["analyze", data, data, "--columns", "1,1",
                 "--scales", "20:200:5", "--table", table_file,
                 "--mc-samples", "150000", "--hurst", "known:0.7,0.7",
                 "--out", out])
    assert code == 0
    report = json.loads(open(out).read())
    assert report["outcome"]["decision"] == "reject"
    assert all(row["rho"] == pytest.approx(1.0, abs=1e-12)
               for row in report["per_scale"])
    assert report["config"]["scales"] == [20, 36, 63, 112, 200]


def test_analyze_report_round_trip(tmp_path, table_file):
    data = _simulate(tmp_path)
    out = str(tmp_path / "report.json")
    code = main(["analyze", data, "--scales", "20:200:5",
                 "--table", table_file, "--mc-samples", "150000",
                 "--hurst", "known:0.7,0.9", "--out", out])
    assert code == 0
    text = open(out).read()
    report = json.loads(text)
    # Serialising the parsed document again reproduces values exactly
    # (floats are emitted with round-trip repr).
    assert json.loads(json.dumps(report)) == report
    assert report["config"]["kappa"] == 5
    per_scale = report["per_scale"]
    for row in per_scale:
        expected = np.sign(row["f2_cross"]) * np.log(abs(row["f2_cross"]))
        assert row["signlog_f2_cross"] == pytest.approx(expected, rel=1e-12)


def test_analyze_csv_format(tmp_path, table_file):
    data = _simulate(tmp_path)
    out = str(tmp_path / "report.csv")
    code = main(["analyze", data, "--scales", "20:200:5",
                 "--table", table_file, "--mc-samples", "150000",
                 "--hurst", "known:0.7,0.9", "--format", "csv",
                 "--out", out])
    assert code == 0
    lines = open(out).read().splitlines()
    assert lines[0].startswith("#")
    header = next(ln for ln in lines if not ln.startswith("#"))
    assert header.split(",")[:3] == ["n", "windows", "discarded"]


def test_analyze_kappa_flags(tmp_path, table_file):
    data = _simulate(tmp_path)
    for kappa, expected in (("r", 5), ("r-1", 4), ("3", 3)):
        out = str(tmp_path / f"rep_{kappa}.json")
        code = main(["analyze", data, "--scales", "20:200:5",
                     "--table", table_file, "--mc-samples", "150000",
                     "--hurst", "known:0.7,0.9", "--kappa", kappa,
                     "--out", out])
        assert code == 0
        assert json.loads(open(out).read())["config"]["kappa"] == expected


def test_analyze_exit_codes(tmp_path, table_file):
    data = _simulate(tmp_path)
    # Infeasible scale configuration -> 3.
    assert main(["analyze", data, "--scales", "20:3000:5",
                 "--table", table_file]) == 3
    # Missing input file -> 2.
    assert main(["analyze", str(tmp_path / "none.csv"),
                 "--table", table_file]) == 2
    # Unparseable hurst flag -> 2.
    assert main(["analyze", data, "--table", table_file,
                 "--hurst", "known:0.7"]) == 2


def test_analyze_white_noise_warns(tmp_path, table_file, capsys):
    out_file = str(tmp_path / "wn.csv")
    main(["simulate", "--kind", "bfgn", "--N", "6000", "--H", "0.5",
          "--G", "0.5", "--seed", "3", "--out", out_file])
    capsys.readouterr()
    code = main(["analyze", out_file, "--scales", "20:300:5",
                 "--table", table_file, "--mc-samples", "150000",
                 "--hurst", "known:0.5,0.5"])
    assert code == 0
    err = capsys.readouterr().err
    assert "0.55" in err and "warning" in err


def test_tabulate_tiny_grid_under_a_minute(tmp_path):
    import time
    t0 = time.perf_counter()
    out = str(tmp_path / "tiny.covtab")
    code = main(["tabulate", "--grid", "0.5:0.7:0.2", "--n-tab", "128",
                 "--ratios", "0.1,0.5,1.0", "--out", out])
    elapsed = time.perf_counter() - t0
    assert code == 0
    assert elapsed < 60.0, elapsed
    assert load_covtab(out).is_complete()


def test_tabulate_resume_noop(tmp_path, table_file):
    text = open(table_file).read()
    target = tmp_path / "copy.covtab"
    target.write_text(text)
    code = main(["tabulate", "--grid", "0.5:0.9:0.2", "--n-tab", "128",
                 "--ratios", "0.1,0.3,0.6,1.0", "--resume",
                 "--out", str(target)])
    assert code == 0
    after = load_covtab(str(target))
    before = load_covtab(table_file)
    assert np.array_equal(after.variance, before.variance)
    assert np.array_equal(after.correlation, before.correlation)


def test_tabulate_resume_completes_partial(tmp_path, table_file):
    import dataclasses
    table = load_covtab(table_file)
    partial = dataclasses.replace(table, variance=table.variance.copy(),
                                  correlation=table.correlation.copy())
    partial.variance[1, 2] = np.nan
    partial.variance[2, 1] = np.nan
    partial.correlation[:, 1, 2] = np.nan
    partial.correlation[:, 2, 1] = np.nan
    target = tmp_path / "partial.covtab"
    save_covtab(partial, str(target))
    code = main(["tabulate", "--grid", "0.5:0.9:0.2", "--n-tab", "128",
                 "--ratios", "0.1,0.3,0.6,1.0", "--resume",
                 "--out", str(target)])
    assert code == 0
    fixed = load_covtab(str(target))
    assert fixed.is_complete()
    assert fixed.variance[1, 2] == pytest.approx(table.variance[1, 2],
                                                 rel=1e-12)


def test_study_power_plumbing(tmp_path, table_file):
    out = str(tmp_path / "power.csv")
    code = main(["study", "--study", "power", "--replicates", "5",
                 "--N", "4000", "--rhos", "0,0.9", "--table", table_file,
                 "--mc-samples", "120000", "--seed", "7", "--out", out])
    assert code == 0
    lines = [ln for ln in open(out) if not ln.startswith("#")]
    assert lines[0].strip().split(",") == ["rho", "replicate", "statistic",
                                           "p_value", "reject"]
    assert len(lines) == 11


def test_study_speed_plumbing(tmp_path, table_file):
    out = str(tmp_path / "speed.csv")
    code = main(["study", "--study", "speed", "--replicates", "20",
                 "--N", "4000", "--table", table_file,
                 "--mc-samples", "100000", "--out", out])
    assert code == 0
    rows = [ln for ln in open(out) if not ln.startswith("#")]
    assert "tabulated" in rows[1] and "surrogate" in rows[2]


def test_study_unknown_name_is_usage_error(tmp_path):
    assert main(["study", "--study", "power", "--rhos", "oops"]) == 2


def test_simulate_all_kinds(tmp_path):
    for kind, extra in [("bfgn", []), ("nongaussian", ["--phi", "3"]),
                        ("mixture", ["--weight", "0.5"]),
                        ("trended", ["--trend-coeffs1", "0,0.01"])]:
        out = str(tmp_path / f"{kind}.csv")
        code = main(["simulate", "--kind", kind, "--N", "2048",
                     "--H", "0.8", "--G", "0.8", "--seed", "2",
                     "--out", out, *extra])
        assert code == 0, kind
        body = [ln for ln in open(out) if not ln.startswith("#")]
        assert len(body) == 2048
