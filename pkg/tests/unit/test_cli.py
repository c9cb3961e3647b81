"""
Tests unitarios — CLI

Tests cubiertos:
  - main.py: parse_config (rejillas, listas de tiempos, errores de eje)
  - main.py: write_csv, print_report
  - main.py: main (filas CSV, --out, determinismo con varios hilos, códigos de salida)
"""

import csv
import io
import json
import math

import pytest
from pydantic import ValidationError

from config import settings
from main import main, parse_config, print_report, write_csv
from middleware.error_handler import ConfigError
from models.responses import CheckResult, SuiteReport


def _rows(text: str) -> list[list[str]]:
    return list(csv.reader(io.StringIO(text)))


# ── parse_config ──────────────────────────────────────────────────────────────


class TestParseConfig:
    def test_kernel_sphere_grid(self):
        config = parse_config(["kernel-sphere", "--n", "2", "--t", "0.2,0.5", "--r", "0:1.2:5", "--eta", "1.0"])
        assert config.n == 2
        assert config.t == (0.2, 0.5)
        assert len(config.r.nodes()) == 5
        assert config.eta.nodes() == [1.0]

    def test_validate_suite(self):
        config = parse_config(["validate", "--suite", "distance"])
        assert config.suite == "distance"
        assert config.out is None

    def test_tolerances_forwarded(self):
        config = parse_config(["kernel-cp", "--rel-tol", "1e-7", "--abs-tol", "1e-11"])
        assert config.rel_tol == 1e-7
        assert config.abs_tol == 1e-11

    def test_malformed_axis(self):
        with pytest.raises(ConfigError):
            parse_config(["distance", "--r", "0:1"])

    def test_malformed_time_list(self):
        with pytest.raises(ConfigError):
            parse_config(["kernel-sphere", "--t", "0.5,x"])

    def test_invalid_n(self):
        with pytest.raises(ValidationError):
            parse_config(["green", "--n", "0"])

    def test_unknown_method_rejected_by_parser(self):
        with pytest.raises(SystemExit) as info:
            parse_config(["kernel-sphere", "--method", "intertwined"])
        assert info.value.code == 2


# ── Formatos de salida ────────────────────────────────────────────────────────


class TestOutputFormats:
    def test_csv_uses_repr_floats(self):
        stream = io.StringIO()
        write_csv(["r", "value"], [(0.1, 1 / 3), (0.2, 7)], stream)
        assert stream.getvalue() == f"r,value\n0.1,{1 / 3!r}\n0.2,7\n"

    def test_report_table(self):
        report = SuiteReport(
            suite="green",
            checks=[
                CheckResult(suite="green", check="a", measured=1e-13, tolerance=1e-12, passed=True),
                CheckResult(suite="green", check="b", measured=0.5, tolerance=1e-3, passed=False, details="lento"),
            ],
        )
        stream = io.StringIO()
        print_report(report, stream)
        lines = stream.getvalue().splitlines()
        assert lines[0] == "suite | check | measured | tolerance | status"
        assert lines[1].endswith("| PASS")
        assert lines[2].endswith("FAIL (lento)")
        assert lines[-1].startswith("1/2")


# ── main ──────────────────────────────────────────────────────────────────────


class TestMain:
    def test_distance_to_antipodal_fiber(self, capsys):
        assert main(["distance", "--r", "0", "--eta", repr(math.pi)]) == 0
        rows = _rows(capsys.readouterr().out)
        assert rows[0] == ["r", "eta", "value"]
        assert float(rows[1][2]) == pytest.approx(math.pi, abs=1e-12)

    def test_kernel_sphere_grid_rows(self, capsys):
        argv = ["kernel-sphere", "--n", "1", "--t", "0.5", "--r", "0:1.2:5", "--eta", "0:3.0:5", "--method", "auto"]
        assert main(argv) == 0
        rows = _rows(capsys.readouterr().out)
        assert len(rows) == 1 + 25
        assert rows[0] == ["r", "eta", "t", "value", "error_estimate", "method", "terms_or_evals"]
        assert all(float(row[3]) > 0 for row in rows[1:])
        assert {row[5] for row in rows[1:]} == {"spectral"}

    def test_parallel_output_is_deterministic(self, capsys, monkeypatch):
        argv = ["kernel-cp", "--t", "0.3,0.6", "--r", "0:0.9:3", "--phi", "0:1.5:3"]
        assert main(argv) == 0
        serial = capsys.readouterr().out
        monkeypatch.setattr(settings, "HOPFHEAT_WORKERS", 4)
        assert main(argv) == 0
        assert capsys.readouterr().out == serial

    def test_out_file(self, tmp_path, capsys):
        target = tmp_path / "green.csv"
        assert main(["green", "--r", "0.5", "--eta", "0:2:3", "--out", str(target)]) == 0
        assert capsys.readouterr().out == ""
        rows = _rows(target.read_text(encoding="utf-8"))
        assert len(rows) == 4

    def test_asymptotics_cp_regime_uses_phi(self, capsys):
        assert main(["asymptotics", "--regime", "cp-vertical", "--t", "0.1", "--phi", "0.7"]) == 0
        rows = _rows(capsys.readouterr().out)
        assert rows[1][0] == "cp-vertical"
        assert float(rows[1][2]) == 0.7

    def test_pole_exits_with_domain_code(self, capsys):
        assert main(["green", "--r", "0", "--eta", "0"]) == 2
        body = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert body["error_code"] == "POLE_SINGULARITY"

    def test_config_error_exit_code(self, capsys):
        assert main(["kernel-sphere", "--t", "-0.5"]) == 2
        body = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert body["error_code"] == "CONFIG_ERROR"

    def test_validate_passing_suite(self, capsys):
        assert main(["validate", "--suite", "orthopoly"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("suite | check | measured | tolerance | status")
        assert "FAIL" not in out
