"""
services/asymptotics.py — Regímenes de tiempo pequeño y distancia subriemanniana.

Esfera S^{4n+3}:
  diagonal    p_t(0,0) ≈ (4πt)^{−(2n+3)} (A_n + B_n t)
  vertical    p_t(0,η) ≈ (π−η) η^{2n−1} e^{−(2πη−η²)/4t} / (4π sin η 2^{6n} t^{4n+1} (2n−1)!)
  horizontal  p_t(r,0) ≈ (4πt)^{−(2n+3/2)} (r/sin r)^{2n+1} e^{−r²/4t} (1 − r cot r)^{−3/2}
  general     punto de silla iφ con φ + η = cos r sin φ · arccos(cos φ cos r)/√(1 − cos²r cos²φ)

CP^{2n+1}:
  diagonal    h_t(0,0) ≈ (I_n + J_n t) / (2 (4πt)^{2n+2})
  vertical    h_t(0,φ) por Laplace en la media en θ de la asintótica vertical de p_t

Las constantes y potencias de t se combinan en espacio logarítmico (t^{−(4n+3)}
ronda 1e20 en n = 2, t = 0.01).

La raíz φ(r, η) se busca en la rama negativa (−π, 0): es la que reproduce
d(r, 0) = r y la pendiente −1/(1 − r cot r) en η → 0. Cuando la raíz cae en
(−π, −π/2) se resuelve en ψ = φ + π para no perder precisión cerca de −π.
"""

import math
from functools import lru_cache

import numpy as np
import structlog
from numpy.typing import NDArray
from scipy.optimize import brentq
from scipy.special import gammaln

from config import settings
from middleware.error_handler import DomainError, NoBracket
from models.entities import VarphiSolution
from models.params import ModelParams, QuadratureSpec
from services.quadrature import integrate_finite

logger = structlog.get_logger(__name__)

HALF_PI = math.pi / 2
_ETA_PI_CLAMP = 1e-9


# ── Constantes de la diagonal ─────────────────────────────────────────────────


def _y_over_sinh(y: NDArray[np.float64]) -> NDArray[np.float64]:
    small = y < 1e-4
    safe = np.where(small, 1.0, y)
    return np.where(small, 1 - y * y / 6, safe / np.sinh(safe))


def _hyperbolic_curvature(y: NDArray[np.float64]) -> NDArray[np.float64]:
    """(sinh y − y cosh y)/(y² sinh y), con −1/3 + y²/45 cerca de 0."""
    small = y < 1e-3
    safe = np.where(small, 1.0, y)
    return np.where(small, -1 / 3 + y * y / 45, (1 - safe / np.tanh(safe)) / (safe * safe))


def _sinh_tail_cutoff(n: int, power: int, abs_tol: float) -> float:
    """Corte donde y^{power} 2^{2n} e^{−2ny} cae bajo abs_tol."""
    budget = math.log(1 / abs_tol)
    upper = budget / (2 * n) + 1
    for _ in range(50):
        upper = (budget + power * math.log(upper) + 2 * n * math.log(2)) / (2 * n)
    return upper


def compute_An_Bn(params: ModelParams, spec: QuadratureSpec | None = None) -> tuple[float, float]:
    """
    A_n = 4π ∫ y^{2n+2}/sinh^{2n} y dy,
    B_n = 4π ∫ y² (y/sinh y)^{2n} (4n² + 4n + 2n(2n+1)(sinh y − y cosh y)/(y² sinh y)) dy.
    """
    spec = (spec or settings.default_quadrature()).tightened(factor=1e-2)
    n = params.n
    upper = _sinh_tail_cutoff(n, 2 * n + 2, spec.abs_tol)

    def a_integrand(y: NDArray[np.float64]) -> NDArray[np.float64]:
        return y * y * _y_over_sinh(y) ** (2 * n)

    def b_integrand(y: NDArray[np.float64]) -> NDArray[np.float64]:
        bracket = 4 * n * n + 4 * n + 2 * n * (2 * n + 1) * _hyperbolic_curvature(y)
        return y * y * _y_over_sinh(y) ** (2 * n) * bracket

    a_n = 4 * math.pi * integrate_finite(a_integrand, 0.0, upper, spec).value
    b_n = 4 * math.pi * integrate_finite(b_integrand, 0.0, upper, spec).value
    logger.debug("diagonal_constants", n=n, A=a_n, B=b_n, upper=upper)
    return a_n, b_n


@lru_cache(maxsize=8)
def _diagonal_constants(n: int) -> tuple[float, float]:
    return compute_An_Bn(ModelParams(n=n))


def p_asym_diagonal(params: ModelParams, t: float) -> float:
    _require_positive_time(t)
    a_n, b_n = _diagonal_constants(params.n)
    return (4 * math.pi * t) ** (-(2 * params.n + 3)) * (a_n + b_n * t)


# ── Lugar de corte vertical ───────────────────────────────────────────────────


def p_cr_asym_vertical(params: ModelParams, t: float, eta: float) -> float:
    """p_t^{CR}(0, η) ≈ η^{2n−1} e^{−(2πη−η²)/4t} / (2^{6n} t^{4n} (2n−1)!)."""
    _require_positive_time(t)
    if not 0 < eta < math.pi:
        raise DomainError(details=f"η={eta} fuera de (0, π)")
    n = params.n
    log_value = (
        (2 * n - 1) * math.log(eta)
        - 6 * n * math.log(2)
        - 4 * n * math.log(t)
        - gammaln(2 * n)
        - (2 * math.pi * eta - eta * eta) / (4 * t)
    )
    return math.exp(log_value)


def p_asym_vertical(params: ModelParams, t: float, eta: float) -> float:
    """Derivada en η de la asintótica CR llevada a p_t por el entrelazamiento."""
    _require_positive_time(t)
    if not 0 < eta < math.pi:
        raise DomainError(details=f"η={eta} fuera de (0, π)")
    n = params.n
    log_value = (
        math.log(math.pi - eta)
        + (2 * n - 1) * math.log(eta)
        - math.log(4 * math.pi * math.sin(eta))
        - 6 * n * math.log(2)
        - (4 * n + 1) * math.log(t)
        - gammaln(2 * n)
        - (2 * math.pi * eta - eta * eta) / (4 * t)
    )
    return math.exp(log_value)


# ── Horizontal y general ──────────────────────────────────────────────────────


def horizontal_curvature(r: float) -> float:
    """f''(0) = 2(1 − r cot r); positiva en (0, π/2)."""
    if r < 1e-4:
        return 2 * r * r / 3
    return 2 * (1 - r / math.tan(r))


def p_asym_horizontal(params: ModelParams, t: float, r: float) -> float:
    _require_positive_time(t)
    if not 0 < r < HALF_PI:
        raise DomainError(details=f"r={r} fuera de (0, π/2); r = 0 pertenece al régimen diagonal")
    n = params.n
    log_value = (
        -(2 * n + 1.5) * math.log(4 * math.pi * t)
        + (2 * n + 1) * math.log(r / math.sin(r))
        - r * r / (4 * t)
        - 1.5 * math.log(horizontal_curvature(r) / 2)
    )
    return math.exp(log_value)


def _saddle_residual(phi: float, r: float, eta: float) -> float:
    cos_r = math.cos(r)
    u = cos_r * math.cos(phi)
    return phi + eta - cos_r * math.sin(phi) * math.acos(u) / math.sqrt(1 - u * u)


def _saddle_residual_shifted(psi: float, r: float, gap: float) -> float:
    """Misma función en ψ = φ + π, con gap = π − η."""
    cos_r = math.cos(r)
    u = -cos_r * math.cos(psi)
    return psi - gap + cos_r * math.sin(psi) * math.acos(u) / math.sqrt(1 - u * u)


def _curvature_at(u: float, r: float) -> float:
    one_minus = 1 - u * u
    return 2 * math.sin(r) ** 2 / one_minus * (1 - u * math.acos(u) / math.sqrt(one_minus))


def solve_varphi(r: float, eta: float) -> VarphiSolution:
    """Raíz de φ + η = cos r sin φ arccos(cos φ cos r)/√(1 − cos²r cos²φ) en la rama negativa."""
    if not 0 < r < HALF_PI:
        raise DomainError(details=f"r={r} fuera de (0, π/2)")
    if not 0 <= eta <= math.pi:
        raise DomainError(details=f"η={eta} fuera de [0, π]")

    if eta == 0:
        u = math.cos(r)
        return VarphiSolution(
            varphi=0.0, u=u, fpp=horizontal_curvature(r), residual=0.0, sin_varphi=0.0, phase=0.0
        )

    eta = min(eta, math.pi - _ETA_PI_CLAMP)
    gap = math.pi - eta
    xtol = 1e-15
    rtol = 4 * np.finfo(float).eps

    if _saddle_residual(-HALF_PI, r, eta) <= 0:
        # raíz en (−π/2, 0): F(0) = η > 0
        phi = brentq(_saddle_residual, -HALF_PI, 0.0, args=(r, eta), xtol=xtol, rtol=rtol)
        sin_phi = math.sin(phi)
        phase = phi + eta
        residual = abs(_saddle_residual(phi, r, eta))
    else:
        low, high = 0.0, HALF_PI
        g_low = _saddle_residual_shifted(low, r, gap)
        g_high = _saddle_residual_shifted(high, r, gap)
        if g_low * g_high > 0:
            raise NoBracket(details=f"(r, η)=({r}, {eta}): G(0)={g_low:.3e}, G(π/2)={g_high:.3e}")
        psi = brentq(_saddle_residual_shifted, low, high, args=(r, gap), xtol=xtol, rtol=rtol)
        phi = psi - math.pi
        sin_phi = -math.sin(psi)
        phase = psi - gap
        residual = abs(_saddle_residual_shifted(psi, r, gap))

    u = math.cos(r) * math.cos(phi)
    fpp = _curvature_at(u, r)
    logger.debug("varphi_solved", r=r, eta=eta, varphi=phi, residual=residual, fpp=fpp)
    return VarphiSolution(varphi=phi, u=u, fpp=fpp, residual=residual, sin_varphi=sin_phi, phase=phase)


def subriemannian_distance(r: float, eta: float) -> float:
    """d(0, η) = √(2πη − η²); d(r, η) = |φ+η| tan r / |sin φ| para r > 0."""
    if not 0 <= r < HALF_PI or not 0 <= eta <= math.pi:
        raise DomainError(details=f"(r, η)=({r}, {eta}) fuera de [0, π/2)×[0, π]")
    if r == 0:
        return math.sqrt(max(2 * math.pi * eta - eta * eta, 0.0))
    if eta == 0:
        return r
    sol = solve_varphi(r, eta)
    return abs(sol.phase) * math.tan(r) / abs(sol.sin_varphi)


def p_asym_general(params: ModelParams, t: float, r: float, eta: float) -> float:
    """
    Asintótica por descenso rápido fuera del lugar de corte. En η → 0 el
    cociente sin φ / sin η tiende a −1/(1 − r cot r) y se recupera la
    fórmula horizontal. El signo global se fija positivo.
    """
    _require_positive_time(t)
    if not 0 < r < HALF_PI:
        raise DomainError(details=f"r={r} fuera de (0, π/2)")
    if not 0 <= eta <= math.pi:
        raise DomainError(details=f"η={eta} fuera de [0, π]")
    n = params.n
    sol = solve_varphi(r, eta)

    if eta < settings.HOPFHEAT_SINGULAR_EPS:
        ratio = 2 / horizontal_curvature(r)
        distance_sq = r * r
    else:
        eta_eff = min(eta, math.pi - _ETA_PI_CLAMP)
        ratio = abs(sol.sin_varphi / math.sin(eta_eff))
        distance_sq = (sol.phase * math.tan(r) / sol.sin_varphi) ** 2

    u = sol.u
    one_minus = 1 - u * u
    arc = math.acos(u)
    log_value = (
        -(2 * n + 1.5) * math.log(4 * math.pi * t)
        + math.log(ratio / math.sin(r))
        + (2 * n + 1) * math.log(arc)
        - 0.5 * math.log(1 - u * arc / math.sqrt(one_minus))
        - n * math.log(one_minus)
        - distance_sq / (4 * t)
    )
    return math.exp(log_value)


def general_exponent(t: float, r: float, eta: float) -> float:
    """Exponente (φ+η)² tan² r / (4t sin² φ) de la asintótica general."""
    if eta == 0:
        return r * r / (4 * t)
    sol = solve_varphi(r, eta)
    return (sol.phase * math.tan(r) / sol.sin_varphi) ** 2 / (4 * t)


# ── CP^{2n+1} ─────────────────────────────────────────────────────────────────


def compute_cp_diagonal_constants(params: ModelParams, spec: QuadratureSpec | None = None) -> tuple[float, float]:
    """
    I_n = ∫ y^{2n+1}/sinh^{2n} y dy,
    J_n = ∫ y^{2n+1}/sinh^{2n} y · (4n² + 4n + 2n(2n+1)(sinh y − y cosh y)/(y² sinh y)) dy + 1.

    Salen de promediar en η la representación integral de p_t(0, η) con
    η ~ t; J_n coincide con 4n(n+1)I_n − 2n.
    """
    spec = (spec or settings.default_quadrature()).tightened(factor=1e-2)
    n = params.n
    upper = _sinh_tail_cutoff(n, 2 * n + 1, spec.abs_tol)

    def i_integrand(y: NDArray[np.float64]) -> NDArray[np.float64]:
        return y * _y_over_sinh(y) ** (2 * n)

    def j_integrand(y: NDArray[np.float64]) -> NDArray[np.float64]:
        bracket = 4 * n * n + 4 * n + 2 * n * (2 * n + 1) * _hyperbolic_curvature(y)
        return y * _y_over_sinh(y) ** (2 * n) * bracket

    i_n = integrate_finite(i_integrand, 0.0, upper, spec).value
    j_n = integrate_finite(j_integrand, 0.0, upper, spec).value + 1
    logger.debug("cp_diagonal_constants", n=n, I=i_n, J=j_n, upper=upper)
    return i_n, j_n


@lru_cache(maxsize=8)
def _cp_diagonal_constants(n: int) -> tuple[float, float]:
    return compute_cp_diagonal_constants(ModelParams(n=n))


def h_asym_diagonal(params: ModelParams, t: float) -> float:
    """
    h_t(0,0) ≈ (I_n + J_n t) / (2 (4πt)^{2n+2}).

    h_t(0,0) = (1/2π)∫_0^π p_t(0, η) dη y la masa está en η ~ t, donde
    sin(ηy/2t)/sin η integra a π/2 para cada y > 0.
    """
    _require_positive_time(t)
    i_n, j_n = _cp_diagonal_constants(params.n)
    return 0.5 * (4 * math.pi * t) ** (-(2 * params.n + 2)) * (i_n + j_n * t)


def h_asym_diagonal_cut_locus(params: ModelParams, t: float) -> float:
    """
    1/((2n−1) 2^{4n+4} π^{2n} t^{2n+2}): límite de h_asym_diagonal_integral.

    Promedia la asintótica del lugar de corte vertical, que no es válida en
    η ~ t; sobrestima h_t(0,0) por un factor 2π²/((2n−1)I_n) (≈ 11 en n = 1).
    """
    _require_positive_time(t)
    n = params.n
    log_value = -(math.log(2 * n - 1) + (4 * n + 4) * math.log(2) + 2 * n * math.log(math.pi) + (2 * n + 2) * math.log(t))
    return math.exp(log_value)


def h_asym_diagonal_integral(params: ModelParams, t: float, spec: QuadratureSpec | None = None) -> float:
    """
    (1/(2π(2n−1)! 2^{6n+2} t^{4n+1})) ∫ θ^{2n−1}/sin θ · e^{(θ²−2πθ)/4t} dθ.

    θ^{2n−1}/sin θ no es integrable en θ = π; la masa está en θ ~ t y la
    integral se corta en π/2, donde el peso ya es e^{−3π²/16t}.
    """
    _require_positive_time(t)
    n = params.n
    spec = spec or settings.default_quadrature()

    def integrand(theta: NDArray[np.float64]) -> NDArray[np.float64]:
        small = theta < 1e-6
        safe = np.where(small, 1.0, theta)
        base = np.where(small, theta ** (2 * n - 2), safe ** (2 * n - 1) / np.sin(safe))
        return base * np.exp((theta * theta - 2 * math.pi * theta) / (4 * t))

    integral = integrate_finite(integrand, 0.0, HALF_PI, spec).value
    log_pref = -(math.log(2 * math.pi) + gammaln(2 * n) + (6 * n + 2) * math.log(2) + (4 * n + 1) * math.log(t))
    return math.exp(log_pref) * integral


def h_asym_vertical(params: ModelParams, t: float, phi: float) -> float:
    """
    h_t(0, φ) ≈ e^{(φ²−2πφ)/4t} φ^{2n−1} √(2(π−φ)/π) / (2π(2n−1)! 2^{6n+2} t^{4n+1/2} √(sin 2φ)).

    Laplace en θ sobre p_asym_vertical(η(θ)) con η ≈ φ + cot φ·θ²/2; el
    factor (π−η) de la asintótica vertical se evalúa en η = φ.
    """
    _require_positive_time(t)
    if not 0 < phi < HALF_PI or math.sin(2 * phi) <= settings.HOPFHEAT_SINGULAR_EPS:
        raise DomainError(details=f"φ={phi}: se requiere sin 2φ > 0")
    n = params.n
    log_value = (
        (phi * phi - 2 * math.pi * phi) / (4 * t)
        + (2 * n - 1) * math.log(phi)
        - 0.5 * math.log(math.sin(2 * phi))
        + 0.5 * math.log(2 * (math.pi - phi) / math.pi)
        - math.log(2 * math.pi)
        - gammaln(2 * n)
        - (6 * n + 2) * math.log(2)
        - (4 * n + 0.5) * math.log(t)
    )
    return math.exp(log_value)


def _require_positive_time(t: float) -> None:
    if t <= 0:
        raise DomainError(details=f"t debe ser > 0 (t={t})")
