"""
Tests unitarios — Función de Green de S^{4n+3}

Tests cubiertos:
  - services/green.py: green_sphere (forma cerrada, polo, monotonía, ecuación)
  - services/green.py: green_transform (cabeza estimada y su monotonía), green_transform_check
"""

import math

import numpy as np
import pytest

from middleware.error_handler import DomainError, PoleSingularity
from models.params import CylPoint, ModelParams
from services.green import green_sphere, green_transform, green_transform_check


def _sub_laplacian(n: int, r: float, eta: float, h: float = 1e-4) -> float:
    def g(rr: float, ee: float) -> float:
        return green_sphere(ModelParams(n=n), CylPoint(r=rr, eta=ee))

    center = g(r, eta)
    d_rr = (g(r + h, eta) - 2 * center + g(r - h, eta)) / h**2
    d_r = (g(r + h, eta) - g(r - h, eta)) / (2 * h)
    d_ee = (g(r, eta + h) - 2 * center + g(r, eta - h)) / h**2
    d_e = (g(r, eta + h) - g(r, eta - h)) / (2 * h)
    drift = (4 * n - 1) / math.tan(r) - 3 * math.tan(r)
    return d_rr + drift * d_r + math.tan(r) ** 2 * (d_ee + 2 / math.tan(eta) * d_e)


# ── Forma cerrada ─────────────────────────────────────────────────────────────


class TestGreenSphere:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_value_where_denominator_is_one(self, n):
        # r = π/2 anula cos r y el denominador vale 1
        value = green_sphere(ModelParams(n=n), CylPoint(r=math.pi / 2 - 1e-12, eta=0.7))
        expected = math.gamma(n) * math.gamma(n + 1) / (8 * math.pi ** (2 * n + 2))
        assert value == pytest.approx(expected, rel=1e-10)

    def test_pole_raises(self, params1):
        with pytest.raises(PoleSingularity) as info:
            green_sphere(params1, CylPoint(r=0.0, eta=0.0))
        assert isinstance(info.value, DomainError)
        assert info.value.exit_code == 2

    def test_decreasing_away_from_pole(self, params2):
        values = [green_sphere(params2, CylPoint(r=0.6, eta=e)) for e in np.linspace(0.05, math.pi, 25)]
        assert np.all(np.diff(values) < 0)

    @pytest.mark.parametrize("n,r,eta", [(1, 0.6, 1.2), (2, 0.4, 2.0), (1, 1.1, 0.3)])
    def test_solves_shifted_equation(self, n, r, eta):
        value = green_sphere(ModelParams(n=n), CylPoint(r=r, eta=eta))
        assert _sub_laplacian(n, r, eta) == pytest.approx(4 * n * (n + 1) * value, rel=1e-5)


# ── Transformada en tiempo ────────────────────────────────────────────────────


class TestGreenTransform:
    @pytest.mark.parametrize("n,r,eta", [(1, 0.5, 1.0), (1, 0.7, 1.5), (2, 0.5, 1.0)])
    def test_matches_closed_form(self, n, r, eta):
        assert green_transform_check(ModelParams(n=n), CylPoint(r=r, eta=eta)) < 1e-3

    def test_diagnostics(self, params1):
        result = green_transform(params1, CylPoint(r=0.5, eta=1.0))
        assert result.method == "spectral"
        assert result.diagnostics["tail"] > 0
        assert result.diagnostics["head_estimate"] >= 0
        assert result.error_estimate >= 0

    def test_invalid_window(self, params1):
        with pytest.raises(DomainError):
            green_transform(params1, CylPoint(r=0.5, eta=1.0), t_min=1.0, t_max=0.5)

    def test_head_is_reported_as_estimate_far_from_pole(self, params1):
        result = green_transform(params1, CylPoint(r=0.5, eta=1.0))
        assert result.diagnostics["head_monotone"] is True
        assert "head_bound" not in result.diagnostics

    def test_head_flagged_near_pole(self, params1):
        # p_s ~ s^{−4} cerca del origen: t_min·p_{t_min} no acota la cabeza
        result = green_transform(params1, CylPoint(r=0.05, eta=0.05))
        assert result.diagnostics["head_monotone"] is False
