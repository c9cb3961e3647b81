"""
Tests unitarios — Modelos de entrada y salida

Tests cubiertos:
  - models/params.py: ModelParams, CylPoint, CPPoint, Truncation, QuadratureSpec
  - models/params.py: GridAxis (parse, nodes), RunConfig (validación cruzada)
  - models/responses.py: KernelRow, CheckResult, SuiteReport
  - models/entities.py: KernelEval, ModeTable, RadialGrid
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from models.entities import KernelEval, ModeTable, RadialGrid
from models.params import CPPoint, CylPoint, GridAxis, ModelParams, QuadratureSpec, RunConfig
from models.responses import CheckResult, KernelRow, SuiteReport

# ── Parámetros y puntos ───────────────────────────────────────────────────────


class TestModelParams:
    def test_sphere_dim(self):
        assert ModelParams(n=2).sphere_dim == 11

    def test_n_must_be_positive(self):
        with pytest.raises(ValidationError):
            ModelParams(n=0)

    def test_frozen(self):
        params = ModelParams(n=1)
        with pytest.raises(ValidationError):
            params.n = 3

    def test_hashable_for_caches(self):
        assert hash(ModelParams(n=1)) == hash(ModelParams(n=1))


class TestPoints:
    @pytest.mark.parametrize("r,eta", [(-0.1, 0.0), (math.pi / 2, 0.0), (0.3, 3.2)])
    def test_cylinder_bounds(self, r, eta):
        with pytest.raises(ValidationError):
            CylPoint(r=r, eta=eta)

    def test_cylinder_accepts_antipodal_fiber(self):
        assert CylPoint(r=0.0, eta=math.pi).eta == math.pi

    def test_cp_canonical_phi(self):
        pt = CPPoint(r=0.2, phi=2.0)
        assert pt.outside_geometric_range
        assert pt.canonical_phi == pytest.approx(math.pi - 2.0)

    def test_cp_inside_range_unchanged(self):
        pt = CPPoint(r=0.2, phi=1.0)
        assert not pt.outside_geometric_range
        assert pt.canonical_phi == 1.0


# ── Políticas numéricas ───────────────────────────────────────────────────────


class TestQuadratureSpec:
    def test_defaults(self):
        spec = QuadratureSpec()
        assert spec.rel_tol == 1e-9
        assert spec.tail_cutoff_sigma == 8.0

    def test_tightened_copy(self):
        spec = QuadratureSpec(rel_tol=1e-6, abs_tol=1e-10)
        tight = spec.tightened(factor=1e-2, abs_tol=1e-14)
        assert tight.rel_tol == pytest.approx(1e-8)
        assert tight.abs_tol == 1e-14
        assert spec.rel_tol == 1e-6

    def test_sigma_floor(self):
        with pytest.raises(ValidationError):
            QuadratureSpec(tail_cutoff_sigma=5.0)


# ── CLI ───────────────────────────────────────────────────────────────────────


class TestGridAxis:
    def test_single_value(self):
        axis = GridAxis.parse("0.7")
        assert axis.nodes() == [0.7]

    def test_range(self):
        axis = GridAxis.parse("0:1.2:5")
        assert axis.nodes() == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.2])

    @pytest.mark.parametrize("text", ["0:1", "a:b:3", "1:0:3", "0:1:0"])
    def test_invalid(self, text):
        with pytest.raises(ValueError):
            GridAxis.parse(text)


class TestRunConfig:
    def test_defaults(self):
        config = RunConfig(command="kernel-sphere")
        assert config.t == (0.5,)
        assert config.method == "auto"
        assert config.params == ModelParams(n=1)

    def test_non_positive_time(self):
        with pytest.raises(ValidationError):
            RunConfig(command="kernel-cp", t=(0.5, 0.0))

    def test_intertwined_only_for_cp(self):
        assert RunConfig(command="kernel-cp", method="intertwined").method == "intertwined"
        with pytest.raises(ValidationError):
            RunConfig(command="kernel-sphere", method="intertwined")

    def test_unknown_suite(self):
        with pytest.raises(ValidationError):
            RunConfig(command="validate", suite="everything")


# ── Salida ────────────────────────────────────────────────────────────────────


class TestResponses:
    def test_kernel_row_rejects_negative_error(self):
        with pytest.raises(ValidationError):
            KernelRow(r=0.0, fiber=0.0, t=0.5, value=1.0, error_estimate=-1e-9, method="spectral")

    def test_suite_report_failures(self):
        ok = CheckResult(suite="s", check="a", measured=1e-9, tolerance=1e-6, passed=True)
        bad = CheckResult(suite="s", check="b", measured=1.0, tolerance=1e-6, passed=False, details="x")
        report = SuiteReport(suite="s", checks=[ok, bad])
        assert not report.passed
        assert report.failures == [bad]

    def test_empty_report_passes(self):
        assert SuiteReport(suite="s").passed


# ── Entidades ─────────────────────────────────────────────────────────────────


class TestEntities:
    def test_terms_or_evals_prefers_terms(self):
        result = KernelEval(1.0, 0.0, "spectral", {"terms_used": 12, "quad_evaluations": 99})
        assert result.terms_or_evals == 12

    def test_terms_or_evals_falls_back_to_evaluations(self):
        assert KernelEval(1.0, 0.0, "integral", {"quad_evaluations": 315}).terms_or_evals == 315
        assert KernelEval(1.0, 0.0, "closed-form").terms_or_evals == 0

    def test_mode_table_length(self):
        idx = np.arange(4)
        table = ModeTable(idx, idx, np.ones(4), np.zeros(4), 0.0, 0.1, 1.0)
        assert len(table) == 4

    def test_radial_grid_spacing_and_copy(self):
        grid = RadialGrid(np.linspace(0.1, 0.5, 5), np.linspace(1.0, 1.2, 3), np.zeros((5, 3)), "cp", 0.3)
        assert grid.h_r == pytest.approx(0.1)
        assert grid.h_fiber == pytest.approx(0.1)
        copy = grid.with_values(np.ones((5, 3)), 0.4)
        assert copy.which == "cp"
        assert copy.time == 0.4
        assert np.all(grid.values == 0)
