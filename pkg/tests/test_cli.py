import csv
import json
import math
import subprocess
import sys

import pytest

import oracles
from poisson_capacity.cli import CSV_COLUMNS, amplitude_grid, dumps, oscillation_demo, run


def _read_csv(path):
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        assert first.startswith("# manifest: ")
        manifest = json.loads(first[len("# manifest: "):])
        return manifest, list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def solved_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "dist.json"
    assert run(["solve", "--amplitude", "1.0", "--out", str(path)]) == 0
    return path


class TestSolveVerify:
    def test_solve_output(self, solved_file):
        data = json.loads(solved_file.read_text())
        assert data["capacity_mi"] == pytest.approx(float(oracles.binary_capacity(1)), abs=1e-9)
        assert data["units"] == "nats" and data["points"] == [0, 1]
        m = data["manifest"]
        assert m["units"] == "nats" and m["tool_version"]
        assert m["truncation"]["epsilon"] == 1e-10
        assert set(m["config"]) >= {"step_size", "kkt_tol", "max_iter"}

    def test_verify_passes(self, solved_file):
        assert run(["verify", str(solved_file), "--tol", "1e-6"]) == 0

    def test_verify_fails_on_suboptimal(self, tmp_path, solved_file):
        data = json.loads(solved_file.read_text())
        data["masses"] = [0.5, 0.5]
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(data))
        assert run(["verify", str(bad)]) == 1

    def test_seventeen_digits(self, solved_file):
        text = solved_file.read_text()
        assert "0.30249015717415" in text
        assert "0.58706573529129646" in text

    def test_round_trip_identical(self, solved_file):
        text = solved_file.read_text()
        assert dumps(json.loads(text)) + "\n" == text

    def test_rerun_identical(self, tmp_path, solved_file):
        again = tmp_path / "again.json"
        run(["solve", "--amplitude", "1.0", "--out", str(again)])
        a = json.loads(again.read_text())
        b = json.loads(solved_file.read_text())
        a["manifest"].pop("command")
        b["manifest"].pop("command")
        assert a == b

    def test_options_reach_config(self, tmp_path):
        out = tmp_path / "d.json"
        assert run(["solve", "--amplitude", "2.0", "--tol", "1e-8", "--points", "3",
                    "--step-size", "0.02", "--max-iter", "5000", "--out", str(out)]) == 0
        cfg = json.loads(out.read_text())["manifest"]["config"]
        assert (cfg["kkt_tol"], cfg["n_points"], cfg["step_size"], cfg["max_iter"]) == (1e-8, 3, 0.02, 5000)

    def test_non_convergence_exit(self, tmp_path):
        out = tmp_path / "d.json"
        assert run(["solve", "--amplitude", "6.0", "--max-iter", "2", "--out", str(out)]) == 1
        assert json.loads(out.read_text())["converged"] is False


class TestBounds:
    def test_from_file(self, solved_file, capsys):
        assert run(["bounds", "--amplitude", "1.0", "--from", str(solved_file)]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["checks_passed"] and rep["checks"]["location_bound_equality"]

    def test_asymptotic(self, capsys):
        assert run(["bounds", "--amplitude", "100", "--asymptotic"]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["capacity_source"] == "asymptotic"
        assert rep["largest_mass_lower_log"] < -11000

    def test_capacity(self, capsys):
        assert run(["bounds", "--amplitude", "1.0", "--capacity", "0.3"]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert "inapplicable" in rep["support_upper_explicit"]

    def test_amplitude_mismatch(self, solved_file):
        assert run(["bounds", "--amplitude", "2.0", "--from", str(solved_file)]) == 2


class TestUsage:
    @pytest.mark.parametrize(
        "argv",
        [[], ["nope"], ["solve"], ["bounds", "--amplitude", "1"],
         ["bounds", "--amplitude", "1", "--capacity", "0.3", "--asymptotic"],
         ["solve", "--amplitude", "-1"], ["solve", "--amplitude", "1", "--tol", "0"],
         ["sweep", "--min", "2", "--max", "1", "--delta", "0.1"],
         ["verify", "/nonexistent/file.json"]],
    )
    def test_exit_two(self, argv):
        assert run(argv) == 2

    def test_help(self):
        assert run(["--help"]) == 0

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "poisson_capacity", "--version"],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and proc.stdout.strip()


class TestSweep:
    def test_grid(self):
        assert amplitude_grid(0.1, 0.5, 0.1) == [0.1, 0.2, 0.3, 0.4, 0.5]
        assert amplitude_grid(1.0, 1.0, 0.5) == [1.0]

    def test_closed_form_curve(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert run(["sweep", "--min", "0.1", "--max", "3.3", "--delta", "0.1", "--out", str(out)]) == 0
        manifest, rows = _read_csv(out)
        assert manifest["units"] == "nats"
        assert len(rows) == 33
        assert tuple(rows[0].keys()) == CSV_COLUMNS
        for row in rows:
            A = float(row["A"])
            assert float(row["capacity_nats"]) == pytest.approx(float(oracles.binary_capacity(A)), abs=1e-4)
            assert row["n_points"] == "2" and row["checks_passed"] == "true"
            assert row["x_interior_min"] == ""
        assert out.read_text().endswith("\n")


class TestOscillationDemo:
    def test_counts(self):
        demo = oscillation_demo()
        assert demo["x"].size == 2000
        assert demo["Xi_zero_crossings"] <= demo["xi_sign_changes"]
        assert demo["holds"]

    def test_xi_reference_values(self):
        xi = oscillation_demo()["xi"]
        assert xi[39] == pytest.approx(5.51214855743627e-15, abs=1e-16)
        assert xi[40] == pytest.approx(-1.10534106807199, abs=1e-13)
        assert xi[17] == pytest.approx(-1.6890092696781, abs=1e-13)

    def test_command(self, tmp_path):
        out = tmp_path / "osc.csv"
        assert run(["demo-oscillation", "--out", str(out)]) == 0
        _, rows = _read_csv(out)
        assert len(rows) == 2000 and list(rows[0]) == ["x", "Xi"]
        assert float(rows[0]["Xi"]) == 0.0
