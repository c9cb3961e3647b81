"""
Tests unitarios — Series espectrales

Tests cubiertos:
  - services/spectral.py: select_modes (suelo de t, orden, cola, max_index)
  - services/spectral.py: SphereSeries, CRSeries, CPSeries (equilibrio, caché, evaluate)
  - services/spectral.py: coeff_integer, evaluate_precise, refine (precisión extendida con mpmath)
"""

import math

import numpy as np
import pytest
from scipy.special import gamma

from middleware.error_handler import SeriesDivergenceGuard
from models.params import ModelParams, Truncation
from services.spectral import CPSeries, CRSeries, SphereSeries, select_modes

# ── select_modes ──────────────────────────────────────────────────────────────


class TestSelectModes:
    def test_below_spectral_floor_rejected(self, params1):
        with pytest.raises(SeriesDivergenceGuard):
            SphereSeries(params1, 0.001)

    def test_modes_ordered_by_diagonal(self, params1):
        table = SphereSeries(params1, 0.2).table
        diagonal = table.k + table.m
        assert np.all(np.diff(diagonal) >= 0)

    def test_tail_is_negligible(self, params1):
        table = SphereSeries(params1, 0.2).table
        assert 0 <= table.tail_bound <= 1e-10 * table.scale

    def test_more_modes_at_smaller_time(self, params1):
        assert len(SphereSeries(params1, 0.05).table) > len(SphereSeries(params1, 0.5).table)

    def test_tiny_max_index_raises(self, params1):
        with pytest.raises(SeriesDivergenceGuard):
            SphereSeries(params1, 0.05, Truncation(max_index=5))

    def test_direct_call_uses_series_pieces(self, params2):
        series = CPSeries(params2, 0.3)
        table = select_modes(series, 0.3)
        np.testing.assert_array_equal(table.k, series.table.k)
        assert table.t_min == 0.3


# ── Equilibrio ────────────────────────────────────────────────────────────────


class TestLongTimeLimit:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_sphere_tends_to_inverse_volume(self, n):
        series = SphereSeries.cached(ModelParams(n=n), 5.0)
        values = series.evaluate([0.0, 0.7, 1.3], [0.0, 1.5, math.pi], 40.0)[0]
        np.testing.assert_allclose(values, gamma(2 * n + 2) / (2 * math.pi ** (2 * n + 2)), rtol=1e-10)

    @pytest.mark.parametrize("n", [1, 2])
    def test_cr_tends_to_inverse_volume(self, n):
        series = CRSeries.cached(ModelParams(n=n), 5.0)
        values = series.evaluate([0.2, 1.0], [0.3, 2.0], 40.0)[0]
        np.testing.assert_allclose(values, gamma(2 * n + 1) / (2 * math.pi ** (2 * n + 1)), rtol=1e-10)

    @pytest.mark.parametrize("n", [1, 2])
    def test_cp_tends_to_inverse_volume(self, n):
        series = CPSeries.cached(ModelParams(n=n), 5.0)
        values = series.evaluate([0.1, 0.9], [0.4, 1.2], 40.0)[0]
        np.testing.assert_allclose(values, gamma(2 * n + 2) / (4 * math.pi ** (2 * n + 2)), rtol=1e-10)


# ── evaluate ──────────────────────────────────────────────────────────────────


class TestEvaluate:
    def test_shape_points_by_times(self, params1):
        series = SphereSeries.cached(params1, 0.3)
        out = series.evaluate([0.1, 0.2, 0.3, 0.4], [1.0, 1.0, 2.0, 2.0], [0.3, 0.6])
        assert out.shape == (2, 4)

    def test_scalar_point_broadcast(self, params1):
        series = SphereSeries.cached(params1, 0.3)
        assert series.evaluate(0.4, 1.0, 0.5).shape == (1, 1)

    def test_time_below_table_rejected(self, params1):
        series = SphereSeries.cached(params1, 0.3)
        with pytest.raises(SeriesDivergenceGuard):
            series.evaluate(0.4, 1.0, 0.2)

    def test_decreasing_in_time_at_origin(self, params1):
        series = SphereSeries.cached(params1, 0.1)
        values = series.evaluate(0.0, 0.0, [0.1, 0.2, 0.4, 0.8])[:, 0]
        assert np.all(np.diff(values) < 0)

    def test_cp_even_in_reflected_phi(self, params1):
        series = CPSeries.cached(params1, 0.3)
        out = series.evaluate([0.5, 0.5], [0.4, math.pi - 0.4], 0.3)[0]
        assert out[0] == pytest.approx(out[1], rel=1e-12)

    def test_cr_theta_derivative_matches_difference(self, params1):
        series = CRSeries.cached(params1, 0.4)
        h = 1e-5
        plus = series.evaluate(0.6, 1.0 + h, 0.5)[0, 0]
        minus = series.evaluate(0.6, 1.0 - h, 0.5)[0, 0]
        derivative = series.evaluate(0.6, 1.0, 0.5, fiber_factor=CRSeries.theta_derivative_factor)[0, 0]
        assert derivative == pytest.approx((plus - minus) / (2 * h), rel=1e-6)


# ── Caché y cota de error ─────────────────────────────────────────────────────


class TestCachedAndBounds:
    def test_cached_returns_same_object(self, params1):
        assert SphereSeries.cached(params1, 0.7) is SphereSeries.cached(params1, 0.7)

    def test_families_cached_separately(self, params1):
        assert SphereSeries.cached(params1, 0.7) is not CPSeries.cached(params1, 0.7)

    def test_error_bound_positive_and_small(self, params1):
        series = SphereSeries.cached(params1, 0.5)
        assert 0 < series.error_bound() < 1e-10
        assert series.terms_used == len(series.table)


# ── Precisión extendida ───────────────────────────────────────────────────────


FAMILIES = [SphereSeries, CRSeries, CPSeries]


class TestPreciseEvaluation:
    @pytest.mark.parametrize("family", FAMILIES)
    @pytest.mark.parametrize("n", [1, 2])
    def test_integer_coefficients_match_log_coeff(self, family, n):
        series = family(ModelParams(n=n), 0.5)
        for k in range(7):
            for m in range(6):
                exact = float(series.coeff_integer(k, m) * series.coeff_constant_precise())
                logged = math.exp(float(series.log_coeff(np.array(k), np.array(m))))
                assert exact == pytest.approx(logged, rel=1e-12)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_evaluate_precise_matches_double(self, params1, family):
        series = family(params1, 0.5)
        double = float(series.evaluate(0.4, 1.1, 0.5)[0, 0])
        assert series.evaluate_precise(0.4, 1.1, 0.5, 30) == pytest.approx(double, rel=1e-12)

    def test_refine_matches_double_at_moderate_time(self, params2):
        series = SphereSeries(params2, 0.5)
        value, error, diagnostics = series.refine(0.3, 0.9, 0.5, 1e-12)
        assert value == pytest.approx(float(series.evaluate(0.3, 0.9, 0.5)[0, 0]), rel=1e-11)
        assert 0 <= error <= 1e-12 * value
        assert diagnostics["precision_digits"] > 15
        assert diagnostics["terms_used"] >= series.terms_used

    def test_refine_resolves_cut_locus_at_small_time(self, params1):
        # en (r, η) = (0, π) la suma en doble precisión pierde todas las cifras
        series = SphereSeries.cached(params1, 0.05)
        value, error, _ = series.refine(0.0, math.pi, 0.05, 1e-10)
        assert value > 0
        assert error <= 1e-10 * value
        assert series.error_bound() > value

    def test_refine_cp_vertical_positive(self, params1):
        value, error, _ = CPSeries.cached(params1, 0.02).refine(0.0, 0.7, 0.02, 1e-10)
        assert value > 0
        assert error <= 1e-10 * value
