import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from lineagedist.cli import main, parse_n_spec
from lineagedist.tables import TABLE1_PUBLISHED, TABLE2_PUBLISHED


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestPointCommands:
    def test_pmf_range(self, capsys):
        code, out, _ = run(capsys, "pmf", "--r", "0.4", "--theta", "0.1", "--method", "exact", "--n", "1..10")
        assert code == 0
        assert out.splitlines()[0] == "n,method,value"
        got = rows(out)
        assert [int(r["n"]) for r in got] == list(range(1, 11))
        vals = [float(r["value"]) for r in got]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_twelve_significant_digits(self, capsys):
        _, out, _ = run(capsys, "pmf", "--r", "0.4", "--theta", "0.1", "--n", "7")
        assert rows(out)[0]["value"] == "0.0227818511326"

    def test_rates_equal_ratios(self, capsys):
        _, a, _ = run(capsys, "pmf", "--lambda", "0.05", "--mu", "0.005", "--rho", "0.018", "--n", "1..5")
        _, b, _ = run(capsys, "pmf", "--r", "0.4", "--theta", "0.1", "--n", "1..5")
        va = [float(r["value"]) for r in rows(a)]
        vb = [float(r["value"]) for r in rows(b)]
        assert np.allclose(va, vb, rtol=1e-10)

    def test_cdf_all_methods_layout(self, capsys):
        code, out, _ = run(
            capsys, "cdf", "--r", "0.1", "--theta", "0.4", "--method", "all", "--n", "10,50,100,500,1000,2000,10000"
        )
        assert code == 0
        got = rows(out)
        assert len(got) == 21
        assert [r["method"] for r in got[:3]] == ["exact", "second-order", "asymptotic"]

    def test_pmf_cdf_round_trip(self, capsys):
        _, p, _ = run(capsys, "pmf", "--r", "0.4", "--theta", "0.1", "--n", "1..200")
        _, c, _ = run(capsys, "cdf", "--r", "0.4", "--theta", "0.1", "--n", "10,100,200")
        pm = np.array([float(r["value"]) for r in rows(p)])
        for r in rows(c):
            n = int(r["n"])
            assert abs(pm[:n].sum() - float(r["value"])) < 1e-10

    def test_quantile(self, capsys):
        code, out, _ = run(capsys, "quantile", "--r", "0.4", "--theta", "0.01", "--p", "0.05,0.01")
        assert code == 0
        assert out.splitlines()[0] == "p,method,n_star"
        assert [r["p"] for r in rows(out)] == ["0.05", "0.01"]

    def test_quantile_overflow_exit(self, capsys):
        code, out, err = run(capsys, "quantile", "--r", "0.1", "--theta", "0.01", "--p", "0.01")
        assert code == 3
        assert rows(out)[0]["n_star"] == "NA" and "2^63" in err

    def test_finite_age(self, capsys):
        code, out, _ = run(capsys, "pmf", "--r", "0.4", "--theta", "0.1", "--n", "1", "--tau", "1e-9")
        assert code == 0 and float(rows(out)[0]["value"]) == pytest.approx(1.0, abs=1e-8)

    def test_output_file(self, capsys, tmp_path):
        path = tmp_path / "o.csv"
        code, out, _ = run(capsys, "pmf", "--r", "0.4", "--theta", "0.1", "--n", "1..3", "--output", str(path))
        assert code == 0 and out == ""
        assert path.read_bytes().startswith(b"n,method,value\n")


class TestUsageErrors:
    @pytest.mark.parametrize(
        "argv,flag",
        [
            (["pmf", "--r", "0.4", "--n", "1"], "--theta"),
            (["pmf", "--r", "0.4", "--theta", "0.1", "--mu", "1", "--n", "1"], "--r"),
            (["pmf", "--r", "0.4", "--theta", "0.1", "--n", "5..1"], "--n"),
            (["pmf", "--r", "0.4", "--theta", "0.1", "--n", "0"], "--n"),
            (["pmf", "--r", "0.4", "--theta", "0.1", "--n", "x"], "--n"),
            (["quantile", "--r", "0.4", "--theta", "0.1", "--p", "1.5"], "--p"),
            (["pmf", "--r", "0.4", "--theta", "0.1", "--n", "1", "--rel-tol", "0"], "--rel-tol"),
            (["simulate", "--r", "0.4", "--theta", "0.1", "--replicates", "10"], "--seed"),
            (["fit"], "--input"),
            (["figures", "--figure", "9z"], "--figure"),
        ],
    )
    def test_exit_two_names_flag(self, capsys, argv, flag):
        code, _, err = run(capsys, *argv)
        assert code == 2
        assert flag in err

    def test_argparse_errors_exit_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["pmf", "--method", "magic"])
        assert exc.value.code == 2

    def test_missing_input_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "fit", "--input", str(tmp_path / "absent.csv"))
        assert code == 2 and "--input" in err

    def test_critical_rejected_without_output(self, capsys):
        code, out, err = run(capsys, "pmf", "--lambda", "1", "--mu", "1", "--rho", "0.1", "--n", "1")
        assert code == 2 and out == "" and "lam == mu" in err


class TestTables:
    def test_table1(self, capsys):
        code, out, _ = run(capsys, "table1")
        assert code == 0
        got = rows(out)
        assert len(got) == 126
        first = got[0]
        assert (first["r"], first["theta"], first["dist"], first["n"], first["paper_value"]) == (
            "0.4",
            "0.01",
            "E",
            "10",
            "0.580",
        )
        for r in got:
            key = (float(r["r"]), float(r["theta"]), r["dist"], int(r["n"]))
            assert float(r["paper_value"]) == TABLE1_PUBLISHED[key]
            assert float(r["difference"]) == pytest.approx(float(r["value"]) - TABLE1_PUBLISHED[key], abs=1e-11)

    def test_table1_asymptotic_rows_theta_free(self, capsys):
        _, out, _ = run(capsys, "table1")
        a = {}
        for r in rows(out):
            if r["dist"] == "A":
                a.setdefault((r["r"], r["n"]), []).append(float(r["value"]))
        assert all(max(v) - min(v) < 1e-11 for v in a.values())

    def test_table2(self, capsys):
        code, out, err = run(capsys, "table2")
        got = rows(out)
        assert len(got) == 36
        na = [r for r in got if r["n_star"] == "NA"]
        # every r = 0.1 upper 1% point lies past 2^63-1; 9 of 36 cells exceeds the 10% budget
        assert len(na) == 9 and {(r["r"], r["p"]) for r in na} == {("0.1", "0.01")}
        assert code == 3 and "2^63" in err
        cell = next(r for r in got if (r["r"], r["theta"], r["dist"], r["p"]) == ("0.1", "0.01", "E", "0.05"))
        assert cell["paper_value"] == "251193"
        for r in got:
            key = (float(r["r"]), float(r["theta"]), r["dist"], float(r["p"]))
            assert int(r["paper_value"]) == TABLE2_PUBLISHED[key]


class TestFigures:
    def test_all_panels(self, capsys, tmp_path):
        code, out, _ = run(capsys, "figures", "--output", str(tmp_path))
        assert code == 0
        panels = {}
        for fig in ("1a", "1b", "1c", "2a", "2b", "2c"):
            path = tmp_path / f"figure_{fig}.csv"
            assert str(path) in out
            data = np.loadtxt(path, delimiter=",", skiprows=1)
            assert path.read_text().startswith("n,exact,second_order,asymptotic\n")
            assert data[0, 0] == 1 and data[-1, 0] == 10**6
            assert np.all(np.diff(data[:, 1:], axis=0) >= 0)
            panels[fig] = data
        e, s, a = panels["1a"][:, 1], panels["1a"][:, 2], panels["1a"][:, 3]
        assert np.max(np.abs(e - s)) < np.max(np.abs(e - a))
        gap1 = np.abs(panels["1a"][:, 1] - panels["1a"][:, 3])
        gap2 = np.abs(panels["2a"][:, 1] - panels["2a"][:, 3])
        assert gap2.max() < gap1.max() / 3
        # beyond a few thousand both gaps are below 0.005 and the faster r = 0.4 decay wins
        mid = panels["1a"][:, 0] <= 10**3
        assert np.all(gap2[mid] < gap1[mid])

    def test_single_panel_small_grid(self, capsys, tmp_path):
        code, _, _ = run(capsys, "figures", "--figure", "2c", "--n-max", "1000", "--output", str(tmp_path))
        assert code == 0
        assert [p.name for p in tmp_path.iterdir()] == ["figure_2c.csv"]


class TestSimulateAndFit:
    def test_histogram_and_tvd(self, capsys):
        code, out, err = run(
            capsys, "simulate", "--r", "0.4", "--theta", "0.1", "--replicates", "20000", "--seed", "42",
            "--max-population", "2000", "--compare",
        )
        assert code == 0
        assert out.startswith("n,count\n")
        assert sum(int(r["count"]) for r in rows(out)) == 20000
        assert "tvd=" in err and "lump_at=1000" in err

    def test_byte_identical(self, capsys):
        argv = ["simulate", "--r", "0.4", "--theta", "0.1", "--replicates", "5000", "--seed", "7", "--max-population", "2000"]
        _, a, _ = run(capsys, *argv)
        _, b, _ = run(capsys, *argv)
        assert a == b
        _, c, _ = run(capsys, "cdf", "--r", "0.4", "--theta", "0.1", "--method", "all", "--n", "1..50")
        _, d, _ = run(capsys, "cdf", "--r", "0.4", "--theta", "0.1", "--method", "all", "--n", "1..50")
        assert c == d

    def test_fit_round_trip(self, capsys, tmp_path):
        sizes = tmp_path / "sizes.csv"
        code, _, _ = run(
            capsys, "simulate", "--r", "0.4", "--theta", "0.1", "--replicates", "100000", "--seed", "5",
            "--max-population", "20000", "--sizes-output", str(sizes), "--output", str(tmp_path / "h.csv"),
        )
        assert code == 0
        code, out, _ = run(capsys, "fit", "--input", str(sizes), "--censor-at", "10000")
        assert code == 0
        kv_text, csv_text = out.split("\n\n")
        kv = dict(line.split("=", 1) for line in kv_text.splitlines())
        assert abs(float(kv["r_hat"]) - 0.4) < 0.05
        assert abs(float(kv["theta_hat"]) - 0.1) < 0.1
        assert rows(csv_text)[0]["r_hat"] == kv["r_hat"]

    def test_fit_named_counts(self, capsys, tmp_path):
        path = tmp_path / "genera.csv"
        path.write_text("genus,species\nA,1\nB,1\nC,3\nD,12\nE,1\nF,2\n")
        code, out, _ = run(capsys, "fit", "--input", str(path))
        assert code in (0, 3)
        assert "n_obs=6" in out


def test_parse_n_spec():
    assert parse_n_spec("1..3,10, 2") == [1, 2, 3, 10]


def test_console_entry():
    proc = subprocess.run(
        [sys.executable, "-m", "lineagedist.cli", "pmf", "--r", "1", "--theta", "0", "--n", "1,2"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout == "n,method,value\n1,exact,0.5\n2,exact,0.166666666667\n"
