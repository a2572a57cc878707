import csv
import io
import json
import subprocess
import sys

import pytest

from rankone.cli import APPROX_COLUMNS, main, parse_float_list, parse_int_list


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_detect_small_single_copy(capsys, tmp_path):
    path = tmp_path / "p.txt"
    code, out, _ = run(["detect", "--r", "1", "--M", "1", "--d", "2", "--eps", "0.5", "--pointset-out", str(path)], capsys)
    assert code == 0
    row = rows(out)[0]
    assert row["regime"] == "small"
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# regime=small r=1 M=1 d=2 eps=0.5 params=")
    assert lines[1] == f"2 {row['size']}"


def test_detect_large_boundary(capsys):
    code, out, _ = run(["detect", "--r", "1", "--M", "2", "--d", "2", "--eps", "0.5"], capsys)
    assert code == 0 and rows(out)[0]["regime"] == "large"


def test_detect_missing_eps(capsys):
    code, _, err = run(["detect", "--r", "1", "--M", "1", "--d", "2"], capsys)
    assert code == 2 and "--eps" in err


def test_unknown_flag_is_usage_error(capsys):
    code, _, _ = run(["detect", "--bogus"], capsys)
    assert code == 2


def test_approximate_zero_source(capsys):
    code, out, _ = run(["approximate", "--r", "1", "--M", "1", "--d", "2", "--eps", "0.25", "--trials", "1", "--source", "zero"], capsys)
    assert code == 0
    assert out.splitlines()[0] == ",".join(APPROX_COLUMNS)
    row = rows(out)[0]
    assert row["total"] == row["detector_size"] and float(row["measured_error"]) == 0.0


def test_approximate_rows_pass(capsys):
    code, out, _ = run(["approximate", "--r", "1", "--M", "1", "--d", "2", "--eps", "0.25", "--trials", "40"], capsys)
    assert code == 0
    assert all(r["pass"] == "true" for r in rows(out)) and len(rows(out)) == 40


def test_approximate_failed_check_exit_code(capsys, monkeypatch):
    from dataclasses import replace

    from rankone import recover

    real = recover.cost_actual_vs_bound

    def failing(*args, **kwargs):
        return [replace(t, passed=False) for t in real(*args, **kwargs)]

    monkeypatch.setattr(recover, "cost_actual_vs_bound", failing)
    argv = ["approximate", "--r", "1", "--M", "1", "--d", "2", "--eps", "0.5", "--trials", "1"]
    code, out, _ = run(argv, capsys)
    assert code == 3 and rows(out)[0]["pass"] == "false"


def test_regime_override_switches_bound(capsys):
    argv = ["approximate", "--r", "1", "--M", "1", "--d", "1", "--eps", "0.5", "--trials", "1",
            "--mode", "formula", "--regime-override", "large"]
    code, out, _ = run(argv, capsys)
    assert code == 0 and rows(out)[0]["regime"] == "large"


def test_approximate_replay(capsys, tmp_path):
    path = tmp_path / "p.txt"
    run(["detect", "--r", "2", "--M", "5", "--d", "2", "--eps", "0.3", "--pointset-out", str(path)], capsys)
    code, out, _ = run(["approximate", "--r", "2", "--M", "5", "--d", "2", "--eps", "0.3", "--trials", "3", "--pointset", str(path)], capsys)
    assert code == 0 and len(rows(out)) == 3


def test_regimes_large_ratios(capsys):
    code, out, _ = run(["regimes", "--r", "2", "--M", "8", "--d", "2", "--eps", "2^-2..2^-5"], capsys)
    assert code == 0
    b = [float(r["bound"]) for r in rows(out)]
    for x, y in zip(b, b[1:]):
        assert y / x == pytest.approx(2 ** 0.5, rel=1e-12)


def test_regimes_small_quadratic_in_d(capsys):
    code, out, _ = run(["regimes", "--r", "1", "--M", "1", "--d", "1..6", "--eps", "0.1"], capsys)
    b = [float(r["bound"]) for r in rows(out)]
    for d, (x, y) in enumerate(zip(b, b[1:]), start=1):
        assert y / x == pytest.approx((d + 1) ** 2 / d**2, rel=1e-12)
    assert {r["tractability"] for r in rows(out)} == {"Polynomial"}


def test_regimes_baseline_dominates_small(capsys):
    for r, M in [(1, "1"), (2, "2"), (3, "6")]:
        code, out, _ = run(["regimes", "--r", str(r), "--M", M, "--d", "3..8", "--eps", "0.5,0.1,0.01"], capsys)
        for row in rows(out):
            assert int(row["halton_baseline"]) >= int(row["detector_size"])


def test_regimes_json(capsys):
    code, out, _ = run(["regimes", "--r", "1", "--M", "1.5", "--d", "2", "--eps", "0.1", "--format", "json"], capsys)
    data = json.loads(out)
    assert code == 0 and data[0]["regime"] == "moderate" and data[0]["tractability"] == "QuasiPolynomial"


def test_lowerbound_large(capsys):
    code, out, _ = run(["lowerbound", "--r", "1", "--M", "2", "--d", "3", "--budget", "7"], capsys)
    row = rows(out)[0]
    assert code == 0 and row["evaded_member"] != "" and float(row["witnessed_error"]) >= 1.0
    code, out, _ = run(["lowerbound", "--r", "1", "--M", "2", "--d", "3", "--budget", "8", "--points", "hitting"], capsys)
    assert rows(out)[0]["evaded_member"] == ""


def test_lowerbound_moderate_size(capsys):
    code, out, _ = run(["lowerbound", "--r", "1", "--M", "1.5", "--d", "5", "--eps", "0.1"], capsys)
    assert code == 0 and rows(out)[0]["family_size"] == "10"


def test_lowerbound_limits(capsys):
    assert run(["lowerbound", "--r", "1", "--M", "2", "--d", "13"], capsys)[0] == 2
    assert run(["lowerbound", "--r", "1", "--M", "1", "--d", "1"], capsys)[0] == 2


def test_dispersion_command(capsys, tmp_path):
    one = tmp_path / "one.txt"
    one.write_text("2 1\n0.5 0.5\n")
    assert run(["dispersion", str(one)], capsys)[:2] == (0, "0.5\n")
    empty = tmp_path / "empty.txt"
    empty.write_text("2 0\n")
    assert run(["dispersion", str(empty)], capsys)[:2] == (0, "1\n")
    bad = tmp_path / "bad.txt"
    bad.write_text("2 1\n0.5 x\n")
    code, _, err = run(["dispersion", str(bad)], capsys)
    assert code == 2 and "line 2" in err
    big = tmp_path / "big.txt"
    big.write_text("5 1\n0.5 0.5 0.5 0.5 0.5\n")
    assert run(["dispersion", str(big)], capsys)[0] == 4


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# experiment\nr = 1\nM = 1\nd = 2\neps = 0.9\nformat = json\n")
    code, out, _ = run(["detect", "--config", str(cfg), "--eps", "0.5"], capsys)
    assert code == 0 and json.loads(out)[0]["eps"] == 0.5
    cfg.write_text("nonsense = 1\n")
    assert run(["detect", "--config", str(cfg)], capsys)[0] == 2


def test_list_parsers():
    assert parse_int_list("1..4,7") == [1, 2, 3, 4, 7]
    assert parse_float_list("2^-2..2^-4") == [0.25, 0.125, 0.0625]
    assert parse_float_list("0.5, 2^-1") == [0.5, 0.5]


def test_byte_identical_across_threads(tmp_path, capsys):
    base = ["approximate", "--r", "2", "--M", "5", "--d", "1..2", "--eps", "0.5,0.1", "--trials", "8", "--seed", "99"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(base + ["--threads", "1", "--out", str(a)]) == 0
    assert main(base + ["--threads", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "rankone", "regimes", "--r", "1", "--M", "4", "--d", "1", "--eps", "0.5"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert float(rows(res.stdout)[0]["bound"]) == 2080.0
