"""
Tests unitarios — Cuadratura adaptativa

Tests cubiertos:
  - services/quadrature.py: integrate_finite (valores, errores, ∫|f|, dominio, no convergencia)
  - services/quadrature.py: gaussian_tail_cutoff, integrate_gaussian_tail
  - services/quadrature.py: integrate_nested, oscillatory_spec

scipy.integrate.quad se usa como oráculo independiente.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from middleware.error_handler import DomainError, NonConvergence
from models.params import QuadratureSpec
from services.quadrature import (
    gaussian_tail_cutoff,
    integrate_finite,
    integrate_gaussian_tail,
    integrate_nested,
    oscillatory_spec,
)

# ── integrate_finite ──────────────────────────────────────────────────────────


class TestIntegrateFinite:
    def test_sine(self):
        result = integrate_finite(np.sin, 0.0, math.pi)
        assert result.value == pytest.approx(2.0, abs=1e-12)
        assert 0 <= result.error_estimate <= 1e-9
        assert result.evaluations % 15 == 0

    def test_matches_scipy_on_oscillatory_gaussian(self):
        def f(x):
            return np.exp(-x * x) * np.cos(5 * x)

        expected, _ = quad(f, 0.0, 3.0, epsabs=1e-14, epsrel=1e-13)
        assert integrate_finite(f, 0.0, 3.0).value == pytest.approx(expected, rel=1e-9, abs=1e-12)

    def test_integrable_endpoint_singularity(self):
        # los nodos de Kronrod nunca tocan los extremos
        spec = QuadratureSpec(rel_tol=1e-8)
        result = integrate_finite(lambda x: 1 / np.sqrt(x), 0.0, 1.0, spec)
        assert result.value == pytest.approx(2.0, rel=1e-7)

    def test_abs_integral_tracks_cancellation(self):
        # ∫_0^{2π} sin = 0 pero ∫|sin| = 4: escala del redondeo
        result = integrate_finite(np.sin, 0.0, 2 * math.pi)
        assert result.value == pytest.approx(0.0, abs=1e-12)
        assert result.abs_integral == pytest.approx(4.0, rel=1e-6)

    def test_abs_integral_equals_value_for_positive_integrand(self):
        result = integrate_finite(np.exp, 0.0, 1.0)
        assert result.abs_integral == pytest.approx(result.value, rel=1e-12)

    def test_empty_interval(self):
        result = integrate_finite(np.cos, 1.0, 1.0)
        assert result.value == 0.0
        assert result.evaluations == 0
        assert result.abs_integral == 0.0

    def test_reversed_interval_rejected(self):
        with pytest.raises(DomainError):
            integrate_finite(np.cos, 1.0, 0.0)

    def test_non_finite_integrand_rejected(self):
        with pytest.raises(DomainError):
            integrate_finite(lambda x: np.full_like(x, np.nan), 0.0, 1.0)

    def test_depth_exhausted_raises(self):
        spec = QuadratureSpec(rel_tol=1e-13, abs_tol=1e-15, max_depth=3)
        with pytest.raises(NonConvergence) as info:
            integrate_finite(lambda x: np.sin(1 / x), 1e-4, 1.0, spec)
        assert info.value.exit_code == 1

    def test_scalar_constant_integrand_broadcast(self):
        assert integrate_finite(lambda x: 3.0, 0.0, 2.0).value == pytest.approx(6.0)


# ── Colas gaussianas ──────────────────────────────────────────────────────────


class TestGaussianTail:
    def test_cutoff_formula(self):
        spec = QuadratureSpec(tail_cutoff_sigma=8.0)
        assert gaussian_tail_cutoff(0.25, spec) == pytest.approx(8.0)
        assert gaussian_tail_cutoff(0.25, spec, growth=2.0) == pytest.approx(10.0)

    def test_negative_growth_ignored(self):
        spec = QuadratureSpec()
        assert gaussian_tail_cutoff(0.5, spec, growth=-3.0) == gaussian_tail_cutoff(0.5, spec)

    def test_first_moment(self):
        result = integrate_gaussian_tail(lambda y: y, 0.3)
        assert result.value == pytest.approx(0.6, rel=1e-10)

    def test_half_gaussian_mass(self):
        result = integrate_gaussian_tail(lambda y: np.ones_like(y), 0.7)
        assert result.value == pytest.approx(math.sqrt(math.pi * 0.7), rel=1e-10)

    def test_growing_integrand(self):
        # ∫_0^∞ cosh y e^{−y²/4t} dy = √(πt) e^{t}
        t = 0.4
        result = integrate_gaussian_tail(np.cosh, t, growth=1.0)
        assert result.value == pytest.approx(math.sqrt(math.pi * t) * math.exp(t), rel=1e-9)

    def test_non_positive_time(self):
        with pytest.raises(DomainError):
            integrate_gaussian_tail(np.cosh, 0.0)


# ── integrate_nested ──────────────────────────────────────────────────────────


class TestIntegrateNested:
    def test_separable_polynomial(self):
        result = integrate_nested(lambda x, y: x * y * y, (0.0, 1.0), (0.0, 2.0))
        assert result.value == pytest.approx(4 / 3, rel=1e-10)

    def test_inner_depends_on_outer(self):
        # ∫_0^1 cos(xy) dy = sin(x)/x
        def f(x, y):
            return np.sin(x) * np.cos(x * y)

        expected, _ = quad(lambda x: math.sin(x) * np.sinc(x / math.pi), 0.0, math.pi)
        assert integrate_nested(f, (0.0, math.pi), (0.0, 1.0)).value == pytest.approx(expected, rel=1e-9)

    def test_abs_integral_passed_through(self):
        result = integrate_nested(lambda x, y: np.sin(x) * np.ones_like(y), (0.0, 2 * math.pi), (0.0, 1.0))
        assert result.abs_integral == pytest.approx(4.0, rel=1e-6)


# ── oscillatory_spec ──────────────────────────────────────────────────────────


class TestOscillatorySpec:
    def test_no_oscillation_keeps_depth(self):
        spec = QuadratureSpec(max_depth=40, max_panels=100)
        widened = oscillatory_spec(spec, 10.0, 0.0)
        assert widened.max_depth == 40
        assert widened.max_panels == 100

    def test_many_oscillations_widen_budget(self):
        spec = QuadratureSpec(max_depth=40, max_panels=100)
        widened = oscillatory_spec(spec, 10.0, 2 * math.pi * 100)
        assert widened.max_depth == 40 + math.ceil(math.log2(1001))
        assert widened.max_panels == 16 * 1000 + 64
        assert widened.rel_tol == spec.rel_tol
