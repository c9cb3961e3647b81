"""
Tests unitarios — Polinomios ortogonales

Tests cubiertos:
  - services/orthopoly.py: jacobi_p, jacobi_p_all, jacobi_p_all_precise, jacobi_norm_sq
  - services/orthopoly.py: gegenbauer_c, gegenbauer_c_all, vertical_character, log_binom

La fórmula de Rodrigues (sympy) sirve de oráculo independiente de la recurrencia.
"""

import math

import mpmath
import numpy as np
import pytest
import sympy as sym
from scipy.integrate import quad
from scipy.special import eval_gegenbauer, eval_jacobi

from models.params import GegenbauerIndex, JacobiIndex
from services.orthopoly import (
    gegenbauer_c,
    gegenbauer_c_all,
    jacobi_norm_sq,
    jacobi_p,
    jacobi_p_all,
    jacobi_p_all_precise,
    log_binom,
    vertical_character,
)

_x = sym.Symbol("x")


def _rodrigues(k: int, alpha: int, beta: int) -> sym.Expr:
    body = (1 - _x) ** (alpha + k) * (1 + _x) ** (beta + k)
    expr = sym.Integer(-1) ** k / (2**k * sym.factorial(k)) * sym.diff(body, _x, k)
    return sym.simplify(expr / ((1 - _x) ** alpha * (1 + _x) ** beta))


# ── jacobi_p ──────────────────────────────────────────────────────────────────


class TestJacobiP:
    @pytest.mark.parametrize("alpha,beta", [(1, 2), (3, 0), (5, 3)])
    @pytest.mark.parametrize("k", [0, 1, 2, 4, 6])
    def test_matches_rodrigues(self, k, alpha, beta):
        poly = sym.lambdify(_x, _rodrigues(k, alpha, beta), "numpy")
        xs = np.array([-0.9, -0.25, 0.0, 0.4, 0.95])
        expected = np.broadcast_to(poly(xs), xs.shape)
        got = jacobi_p(JacobiIndex(k=k, alpha=alpha, beta=beta), xs)
        np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-10)

    @pytest.mark.parametrize("k", [0, 3, 9])
    def test_value_at_one_is_binomial(self, k):
        got = jacobi_p(JacobiIndex(k=k, alpha=3, beta=2), 1.0)
        assert got == pytest.approx(math.comb(k + 3, k), rel=1e-13)

    def test_reflection_symmetry(self):
        xs = np.linspace(-1, 1, 11)
        for k in range(6):
            left = jacobi_p(JacobiIndex(k=k, alpha=1, beta=4), -xs)
            right = (-1) ** k * jacobi_p(JacobiIndex(k=k, alpha=4, beta=1), xs)
            np.testing.assert_allclose(left, right, rtol=1e-12, atol=1e-11)

    def test_scalar_input_returns_float(self):
        assert isinstance(jacobi_p(JacobiIndex(k=2, alpha=1, beta=2), 0.3), float)

    def test_all_stacks_on_first_axis(self):
        x = np.zeros((3, 4))
        table = jacobi_p_all(7, 1.0, 2.0, x)
        assert table.shape == (8, 3, 4)
        np.testing.assert_array_equal(table[0], 1.0)

    def test_all_outside_interval_matches_scipy(self):
        # la ruta integral evalúa en cos r · cosh y > 1
        x = np.array([1.5, 3.0, 10.0])
        table = jacobi_p_all(12, 1.0, 3.0, x)
        np.testing.assert_allclose(table[12], eval_jacobi(12, 1.0, 3.0, x), rtol=1e-12)

    @pytest.mark.parametrize("alpha,beta", [(1, 2), (3, 0), (5, 7)])
    def test_all_precise_matches_double(self, alpha, beta):
        with mpmath.workdps(40):
            table = jacobi_p_all_precise(10, alpha, beta, mpmath.mpf("0.35"))
        expected = jacobi_p_all(10, float(alpha), float(beta), np.array(0.35))
        np.testing.assert_allclose([float(v) for v in table], expected, rtol=1e-12)

    def test_all_precise_matches_rodrigues(self):
        with mpmath.workdps(50):
            value = jacobi_p_all_precise(6, 2, 3, mpmath.mpf(1) / 3)[6]
        exact = _rodrigues(6, 2, 3).subs(_x, sym.Rational(1, 3))
        assert float(value) == pytest.approx(float(exact), rel=1e-14)

    def test_negative_index_rejected(self):
        with pytest.raises(ValueError):
            JacobiIndex(k=-1, alpha=1, beta=1)

    def test_alpha_at_minus_one_rejected(self):
        with pytest.raises(ValueError):
            JacobiIndex(k=1, alpha=-1, beta=0)


# ── jacobi_norm_sq ────────────────────────────────────────────────────────────


class TestJacobiNormSq:
    @pytest.mark.parametrize("k,alpha,beta", [(0, 1, 2), (3, 1, 2), (5, 3, 5), (2, 0.5, 1.5)])
    def test_matches_quadrature(self, k, alpha, beta):
        idx = JacobiIndex(k=k, alpha=alpha, beta=beta)
        value, _ = quad(
            lambda x: jacobi_p(idx, x) ** 2 * (1 - x) ** alpha * (1 + x) ** beta, -1, 1, epsabs=1e-14, epsrel=1e-13
        )
        assert jacobi_norm_sq(idx) == pytest.approx(value, rel=1e-9)

    def test_orthogonality(self):
        a = JacobiIndex(k=2, alpha=1, beta=2)
        b = JacobiIndex(k=5, alpha=1, beta=2)
        value, _ = quad(lambda x: jacobi_p(a, x) * jacobi_p(b, x) * (1 - x) * (1 + x) ** 2, -1, 1)
        assert abs(value) < 1e-12


# ── Gegenbauer ────────────────────────────────────────────────────────────────


class TestGegenbauer:
    @pytest.mark.parametrize("m", [0, 1, 4, 10])
    def test_value_at_one(self, m):
        got = gegenbauer_c(GegenbauerIndex(m=m, lam=3), 1.0)
        assert got == pytest.approx(math.comb(m + 5, m), rel=1e-13)

    def test_matches_scipy_inside_and_outside(self):
        x = np.array([-0.7, 0.2, 1.0, math.cosh(1.3), math.cosh(4.0)])
        for m in range(15):
            got = gegenbauer_c(GegenbauerIndex(m=m, lam=5), x)
            np.testing.assert_allclose(got, eval_gegenbauer(m, 5, x), rtol=1e-12, atol=1e-8)

    def test_all_shape(self):
        assert gegenbauer_c_all(6, 2.0, np.zeros(5)).shape == (7, 5)

    def test_lambda_must_be_positive(self):
        with pytest.raises(ValueError):
            GegenbauerIndex(m=1, lam=0)


# ── vertical_character ────────────────────────────────────────────────────────


class TestVerticalCharacter:
    def test_endpoints(self):
        for m in range(6):
            assert vertical_character(m, 0.0) == pytest.approx(m + 1)
            assert vertical_character(m, math.pi) == pytest.approx((-1) ** m * (m + 1))

    def test_is_chebyshev_second_kind(self):
        eta = np.linspace(0.1, 3.0, 9)
        for m in range(8):
            expected = eval_gegenbauer(m, 1.0, np.cos(eta))
            np.testing.assert_allclose(vertical_character(m, eta), expected, rtol=1e-12, atol=1e-12)

    def test_continuous_across_threshold(self):
        for m in range(6):
            inside = vertical_character(m, 1e-9)
            outside = vertical_character(m, 1e-6)
            assert inside == pytest.approx(outside, rel=1e-9)

    def test_scalar_returns_float(self):
        assert isinstance(vertical_character(2, 0.5), float)


# ── log_binom ─────────────────────────────────────────────────────────────────


class TestLogBinom:
    def test_integer_values(self):
        got = np.exp(log_binom([5, 10, 30], [2, 3, 15]))
        np.testing.assert_allclose(got, [10, 120, math.comb(30, 15)], rtol=1e-12)
