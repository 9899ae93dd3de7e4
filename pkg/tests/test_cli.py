import csv
import json
import subprocess
import sys

import pytest

from heatcert.cli import main


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def family(K, gamma, **extra):
    return {"system": {"family": "paper_example", "K": K, "gamma": gamma}, **extra}


class TestCheck:
    def test_certificate_exit_zero(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", family(100, 1.3))
        code, out, _ = run(capsys, "check", "--config", cfg, "--order", "0")
        assert code == 0
        assert out["feasible"] and out["N"] == 0
        assert out["margin"] > 1e-7
        assert out["validation"]["passed"]

    def test_case_b_exit_one(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", family(100, 0.2))
        code, out, _ = run(capsys, "check", "--config", cfg, "--order", "12")
        assert code == 1
        assert not out["feasible"] and "witness" not in out

    def test_trouble_exit_three(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", family(100, 0.05, solver={"max_iterations": 2}))
        code, out, _ = run(capsys, "check", "--config", cfg, "--order", "8")
        assert code == 3
        assert out["status"] == "NumericalTrouble"

    def test_explicit_system(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {"system": {"A": [[-2.0]], "B": [[0.1]], "C": [[0.1]], "gamma": 1.0}})
        code, out, _ = run(capsys, "check", "--config", cfg, "--order", "0")
        assert code == 0
        assert out["witness"]["P"][0][0] > 0

    @pytest.mark.parametrize(
        "system, field",
        [
            ({"family": "paper_example", "K": 1, "gamma": 1, "A": [[1.0]]}, "both"),
            ({"family": "nope", "K": 1, "gamma": 1}, "system.family"),
            ({"family": "paper_example", "gamma": 1}, "system.K"),
            ({"family": "paper_example", "K": 1, "gamma": -1}, "system.gamma"),
            ({"A": [[1, 0], [0]], "B": [[1], [1]], "C": [[1, 1]], "gamma": 1}, "system.A"),
            ({"A": [[1, 0], [0, 1]], "B": [[1]], "C": [[1, 1]], "gamma": 1}, "system.B"),
            ({"A": [[1.0]], "B": [[1.0]], "gamma": 1}, "C"),
        ],
    )
    def test_malformed_config_names_field(self, tmp_path, capsys, system, field):
        cfg = write(tmp_path, "c.json", {"system": system})
        code, _, err = run(capsys, "check", "--config", cfg, "--order", "0")
        assert code == 2
        assert field in err

    def test_unknown_solver_option(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", family(100, 1, solver={"tolerance": 1}))
        code, _, err = run(capsys, "check", "--config", cfg, "--order", "0")
        assert code == 2 and "tolerance" in err

    def test_missing_and_invalid_files(self, tmp_path, capsys):
        assert run(capsys, "check", "--config", str(tmp_path / "none.json"), "--order", "0")[0] == 2
        bad = write(tmp_path, "bad.json", "{not json")
        assert run(capsys, "check", "--config", bad, "--order", "0")[0] == 2

    def test_singular_equilibrium(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {"system": {"A": [[1.0]], "B": [[1.0]], "C": [[-1.0]], "gamma": 1}})
        code, _, err = run(capsys, "check", "--config", cfg, "--order", "0")
        assert code == 2 and "singular" in err

    def test_usage_error(self, capsys):
        assert main(["check"]) == 2


class TestHierarchy:
    def test_case_a(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", family(100, 1))
        code, out, _ = run(capsys, "hierarchy", "--config", cfg, "--max-order", "2")
        assert code == 0
        assert out["min_order"] == 1
        assert [o["N"] for o in out["orders"]] == [0, 1]

    def test_none(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", family(100, 0.2))
        code, out, _ = run(capsys, "hierarchy", "--config", cfg, "--max-order", "3")
        assert code == 1
        assert out["min_order"] is None

    def test_singular_exit_two(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {"system": {"A": [[1.0]], "B": [[1.0]], "C": [[-1.0]], "gamma": 1}})
        assert run(capsys, "hierarchy", "--config", cfg, "--max-order", "2")[0] == 2


class TestSweep:
    def test_grid_around_case_a(self, tmp_path, capsys):
        cfg = write(
            tmp_path,
            "s.json",
            family(100, 1, sweep={"K": [90, 110], "gamma": [0.9, 1.1], "N_max": 2}, output={"map_csv": str(tmp_path / "m.csv")}),
        )
        code, out, _ = run(capsys, "sweep", "--config", cfg, "--jobs", "1")
        assert code == 0
        rows = list(csv.DictReader((tmp_path / "m.csv").open()))
        assert len(rows) == 4
        # agrees with per-corner checks
        for r in rows:
            c = write(tmp_path, "one.json", family(float(r["K"]), float(r["gamma"])))
            _, h, _ = run(capsys, "hierarchy", "--config", c, "--max-order", "2")
            assert int(r["min_order"]) == h["min_order"]
        assert sum(out["counts"].values()) == 4
        assert "-1" not in out["counts"]

    def test_gamma_band_has_white_cells(self, tmp_path, capsys):
        cfg = write(
            tmp_path,
            "s.json",
            family(100, 1, sweep={"K": [100], "gamma": {"min": 0.1, "max": 0.3, "num": 3}, "N_max": 4}, output={"map_csv": str(tmp_path / "m.csv")}),
        )
        code, out, _ = run(capsys, "sweep", "--config", cfg, "--full-scan")
        assert code == 0
        assert out["counts"].get("-1", 0) >= 1
        assert out["nesting_violations"] == []

    @pytest.mark.parametrize(
        "sweep",
        [
            {"K": [], "gamma": [1.0]},
            {"K": [1.0], "gamma": {"min": 0.1, "max": 1, "num": 0}},
            {"K": [2.0, 1.0], "gamma": [1.0]},
            {"gamma": [1.0]},
            {"K": [1.0], "gamma": [1.0], "N_max": -1},
        ],
    )
    def test_bad_grid_exit_two(self, tmp_path, capsys, sweep):
        cfg = write(tmp_path, "s.json", family(100, 1, sweep=sweep))
        assert run(capsys, "sweep", "--config", cfg)[0] == 2

    def test_explicit_system_needs_family(self, tmp_path, capsys):
        cfg = write(tmp_path, "s.json", {"system": {"A": [[-1.0]], "B": [[0.0]], "C": [[0.0]], "gamma": 1}, "sweep": {"K": [1], "gamma": [1]}})
        code, _, err = run(capsys, "sweep", "--config", cfg)
        assert code == 2 and "sweep.family" in err


class TestSimulateAndValidate:
    def test_witness_round_trip(self, tmp_path, capsys):
        report = tmp_path / "rep.json"
        cfg = write(
            tmp_path,
            "a.json",
            family(
                100,
                1,
                output={"report": str(report), "trajectory_csv": str(tmp_path / "t.csv"), "field_csv": str(tmp_path / "f.csv")},
            ),
        )
        assert run(capsys, "check", "--config", cfg, "--order", "1")[0] == 0
        saved = json.loads(report.read_text())
        witness = tmp_path / "w.json"
        witness.write_text(report.read_text())

        code, out, _ = run(capsys, "validate", "--config", cfg, "--witness", str(witness), "--order", "1")
        assert code == 0 and out["validation"]["passed"]
        assert out["validation"]["margin"] == pytest.approx(saved["margin"], rel=1e-12)

        code, out, _ = run(capsys, "simulate", "--config", cfg, "--witness", str(witness))
        assert code == 0
        assert out["order"] == 1
        assert out["monotone_fraction"] >= 0.99
        assert not out["diverged"]
        rows = list(csv.reader((tmp_path / "t.csv").open()))
        assert rows[0][0] == "t" and rows[1][6] != ""
        assert (tmp_path / "f.csv").exists()

    def test_validate_fails_on_wrong_system(self, tmp_path, capsys):
        a = write(tmp_path, "a.json", family(100, 1.3, output={"report": str(tmp_path / "r.json")}))
        run(capsys, "check", "--config", a, "--order", "0")
        b = write(tmp_path, "b.json", family(100, 0.2))
        code, out, _ = run(capsys, "validate", "--config", b, "--witness", str(tmp_path / "r.json"), "--order", "0")
        assert code == 1 and not out["validation"]["passed"]

    def test_validate_order_mismatch(self, tmp_path, capsys):
        a = write(tmp_path, "a.json", family(100, 1.3, output={"report": str(tmp_path / "r.json")}))
        run(capsys, "check", "--config", a, "--order", "0")
        assert run(capsys, "validate", "--config", a, "--witness", str(tmp_path / "r.json"), "--order", "2")[0] == 2

    def test_incompatible_initial_data(self, tmp_path, capsys):
        cfg = write(
            tmp_path,
            "s.json",
            family(100, 1, simulation={"T_final": 0.1, "X0": [0, 1, -1, 0], "u0": [1.0] * 21}, output={"trajectory_csv": str(tmp_path / "t.csv")}),
        )
        code, _, err = run(capsys, "simulate", "--config", cfg)
        assert code == 2 and "C X0" in err

    def test_bad_sim_field(self, tmp_path, capsys):
        cfg = write(tmp_path, "s.json", family(100, 1, simulation={"M": 2.5}))
        code, _, err = run(capsys, "simulate", "--config", cfg)
        assert code == 2 and "simulation.M" in err

    def test_deterministic_output(self, tmp_path, capsys):
        cfg = write(tmp_path, "s.json", family(100, 1, simulation={"T_final": 0.5}, output={"trajectory_csv": str(tmp_path / "t.csv")}))
        run(capsys, "simulate", "--config", cfg)
        first = (tmp_path / "t.csv").read_bytes()
        run(capsys, "simulate", "--config", cfg)
        assert (tmp_path / "t.csv").read_bytes() == first


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, "c.json", family(100, 1.3))
    proc = subprocess.run([sys.executable, "-m", "heatcert", "check", "--config", cfg, "--order", "0"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["feasible"]
