from __future__ import annotations

import json
import subprocess
import sys

import pytest

from unfitted_oseen.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from unfitted_oseen.harness import EocRow, EocTable, convergence_study, eoc
from unfitted_oseen.solver import RunConfig


def test_eoc_helper():
    assert eoc(8.0, 1.0) == pytest.approx(3.0)
    assert eoc(0.0, 0.0) is None
    assert eoc(None, 1.0) is None
    assert eoc(1.0, float("nan")) is None


def test_eoc_table_formatting_with_zero_errors(tmp_path):
    zero = {"e_u0": 0.0, "e_u1": 0.0, "e_p0": 0.0, "e_p1": 0.0}
    t = EocTable(3, [EocRow(16, 1 / 16, dict(zero)), EocRow(32, 1 / 32, dict(zero))])
    text = t.format()
    rows = text.splitlines()[3:]
    assert sum(cell == "---" for r in rows for cell in r.split()) == 8
    assert "0.000e+00" in text
    t.to_csv(tmp_path / "eoc.csv")
    lines = (tmp_path / "eoc.csv").read_text().splitlines()
    assert lines[0].startswith("nc,h,e_u0,order_e_u0")
    assert len(lines) == 3


def test_eoc_table_orders_and_gaps():
    rows = [
        EocRow(16, 1 / 16, {"e_u0": 8e-3, "e_u1": 1.0, "e_p0": 1.0, "e_p1": 1.0}),
        EocRow(32, 1 / 32, {"e_u0": 1e-3, "e_u1": 0.25, "e_p0": 0.5, "e_p1": 1.0}),
        EocRow(64, 1 / 64, None, note="SolverError: singular"),
    ]
    t = EocTable(3, rows)
    assert t.orders("e_u0")[:2] == [None, pytest.approx(3.0)]
    assert t.order(1, "e_u1") == pytest.approx(2.0)
    assert t.order(2, "e_u0") is None
    text = t.format()
    assert "failed" in text and "SolverError" in text and "3.00" in text


def test_convergence_study_requires_halving():
    with pytest.raises(ValueError):
        convergence_study(RunConfig(k=2, nc=8, case="steady-poly"), [8, 12])


def test_convergence_study_steady_poly():
    table, results = convergence_study(RunConfig(k=2, nc=8, case="steady-poly", T=0.375), [8, 16])
    assert len(table.rows) == 2 and all(r.errors for r in table.rows)
    assert all(r.errors["e_u0"] < 1e-8 for r in table.rows)
    assert all(r.config_hash for r in table.rows)
    assert table.rows[0].config_hash != table.rows[1].config_hash


def test_cli_missing_k_is_usage_error(capsys):
    assert main([]) == EXIT_USAGE
    assert "--k" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["--k", "5"],
    ["--k", "3", "--case", "unknown"],
    ["--k", "3", "--snapshots", "9.0"],
    ["--k", "3", "--gamma0", "-1"],
    ["--k", "3", "--quad-order", "0"],
    ["--k", "3", "--nc", "16", "24"],
    ["--k", "3", "--case", "tracking-only", "--nc", "16", "32"],
])
def test_cli_invalid_combinations(argv):
    assert main(argv) == EXIT_USAGE


def test_cli_help_exits_ok(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "usage" in capsys.readouterr().out


def test_cli_steady_poly_run(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["--k", "2", "--nc", "8", "--case", "steady-poly", "--T", "0.375", "--out", str(out)])
    assert code == EXIT_OK
    data = json.loads((out / "result.json").read_text())
    assert data["status"] == "ok" and data["errors"]["e_u0"] < 1e-8
    assert (out / "diagnostics.csv").exists()
    assert "e_u0" in capsys.readouterr().out


def test_cli_tracking_snapshots(tmp_path):
    out = tmp_path / "trk"
    assert main(["--case", "tracking-only", "--k", "3", "--nc", "16", "--T", "0.5", "--out", str(out)]) == EXIT_OK
    names = sorted(p.name for p in out.iterdir())
    assert "interfaces.svg" in names and "interface_t0.5.csv" in names and "interface_t0.csv" in names
    svg = (out / "interfaces.svg").read_text()
    assert svg.startswith("<?xml") and 'version="1.1"' in svg and svg.count("<path") == 2


def test_cli_numerical_failure_exit_code(monkeypatch):
    import unfitted_oseen.cli as cli
    from unfitted_oseen.solver import RunResult

    monkeypatch.setattr(cli, "run", lambda cfg: RunResult({}, {}, [], status="failed", failure="SolverError: x"))
    assert main(["--k", "2", "--nc", "8"]) == EXIT_FAILURE


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "unfitted_oseen"], capture_output=True, text=True)
    assert r.returncode == 2 and "usage" in r.stderr
