"""
services/cp_kernel.py — Núcleo subelíptico h_t(r, φ) de CP^{2n+1}.

Tres rutas:
  - espectral: Σ σ_{k,m} e^{−[4k(k+2n+2m+1)+8nm]t} (cos r)^{2m} P_m^{0,0}(cos 2φ) P_k^{2n−1,2m+1}(cos 2r),
    reevaluada con mpmath cuando el redondeo supera HOPFHEAT_SERIES_REL_TOL
  - entrelazada: (1/2π) ∫_0^π p_t(r, arccos(cos φ cos θ)) dθ con p_t espectral
  - integral: la misma media en θ con p_t por su representación integral (cuadraturas anidadas)

El núcleo sólo depende de φ a través de cos 2φ. Se aceptan φ ∈ [0, π]; los
valores por encima de π/2 quedan marcados en los diagnósticos.
"""

import math

import numpy as np
import structlog
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammaln

from config import settings
from middleware.error_handler import DomainError
from models.entities import KernelEval
from models.params import CPPoint, CylPoint, Method, ModelParams, QuadratureSpec, Truncation
from services.quadrature import integrate_finite, integrate_nested
from services.spectral import CPSeries, SphereSeries
from services.sphere_kernel import p_t_integral, p_t_spectral_grid

logger = structlog.get_logger(__name__)


def _diagnostics(pt: CPPoint, **extra) -> dict:
    if pt.outside_geometric_range:
        extra["outside_geometric_range"] = True
    return extra


def _fiber_angle(phi: float, theta: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.arccos(np.clip(math.cos(phi) * np.cos(theta), -1.0, 1.0))


# ── Rutas ─────────────────────────────────────────────────────────────────────


def h_t_spectral(
    params: ModelParams,
    t: float,
    pt: CPPoint,
    trunc: Truncation | None = None,
    rel_tol: float | None = None,
) -> KernelEval:
    """Serie espectral en un punto; si su cota de error supera rel_tol·|h_t| se reevalúa con mpmath."""
    rel_tol = settings.HOPFHEAT_SERIES_REL_TOL if rel_tol is None else rel_tol
    series = CPSeries.cached(params, t, trunc)
    value = float(series.evaluate(pt.r, pt.phi, t)[0, 0])
    error = series.error_bound()
    diagnostics = {"terms_used": series.terms_used, "tail_bound": series.table.tail_bound}
    if error > rel_tol * abs(value):
        value, error, diagnostics = series.refine(pt.r, pt.phi, t, rel_tol)
    return KernelEval(value=value, error_estimate=error, method="spectral", diagnostics=_diagnostics(pt, **diagnostics))


def h_t_spectral_grid(
    params: ModelParams,
    times: ArrayLike,
    r: ArrayLike,
    phi: ArrayLike,
    trunc: Truncation | None = None,
) -> NDArray[np.float64]:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    series = CPSeries.cached(params, float(times.min()), trunc)
    return series.evaluate(r, phi, times)


def h_t_intertwined(
    params: ModelParams,
    t: float,
    pt: CPPoint,
    spec: QuadratureSpec | None = None,
    trunc: Truncation | None = None,
) -> KernelEval:
    """Media en θ de p_t(r, η(θ)) con cos η = cos φ cos θ."""
    spec = spec or settings.default_quadrature()

    def integrand(theta: NDArray[np.float64]) -> NDArray[np.float64]:
        eta = _fiber_angle(pt.phi, theta)
        return p_t_spectral_grid(params, t, np.full_like(theta, pt.r), eta, trunc)[0]

    result = integrate_finite(integrand, 0.0, math.pi, spec)
    series_error = SphereSeries.cached(params, t, trunc).error_bound()
    return KernelEval(
        value=result.value / (2 * math.pi),
        error_estimate=result.error_estimate / (2 * math.pi) + series_error / 2,
        method="intertwined",
        diagnostics=_diagnostics(pt, quad_evaluations=result.evaluations),
    )


def h_t_integral(params: ModelParams, t: float, pt: CPPoint, spec: QuadratureSpec | None = None) -> KernelEval:
    """
    Integral doble: exterior en θ ∈ [0, π] (finita), interior en y (cola gaussiana).

    La tolerancia absoluta interior se escala con p_t(r, φ) para que no domine
    sobre la relativa cuando el núcleo es pequeño.
    """
    spec = spec or settings.default_quadrature()
    scale = abs(p_t_integral(params, t, CylPoint(r=pt.r, eta=pt.canonical_phi), spec).value)
    inner_abs = max(spec.rel_tol * scale * 0.1, np.finfo(float).tiny)
    inner_spec = spec.tightened(factor=0.1)
    inner_error = [0.0]
    inner_evaluations = [0]

    def outer(theta: NDArray[np.float64]) -> NDArray[np.float64]:
        out = np.empty_like(theta)
        for i, eta in enumerate(_fiber_angle(pt.phi, theta)):
            inner = p_t_integral(params, t, CylPoint(r=pt.r, eta=float(eta)), inner_spec, value_abs_tol=inner_abs)
            out[i] = inner.value
            inner_error[0] = max(inner_error[0], inner.error_estimate)
            inner_evaluations[0] += int(inner.diagnostics["quad_evaluations"])
        return out

    outer_spec = spec.model_copy(update={"abs_tol": max(spec.rel_tol * scale, np.finfo(float).tiny)})
    result = integrate_finite(outer, 0.0, math.pi, outer_spec)
    logger.debug("h_t_integral", n=params.n, t=t, r=pt.r, phi=pt.phi, evaluations=inner_evaluations[0])
    return KernelEval(
        value=result.value / (2 * math.pi),
        error_estimate=(result.error_estimate + math.pi * inner_error[0]) / (2 * math.pi),
        method="integral",
        diagnostics=_diagnostics(pt, quad_evaluations=inner_evaluations[0]),
    )


def evaluate_cp(
    params: ModelParams,
    t: float,
    pt: CPPoint,
    method: Method = "auto",
    spec: QuadratureSpec | None = None,
    trunc: Truncation | None = None,
) -> KernelEval:
    """Despacho por método; `auto` usa la serie allí donde converge (t ≥ HOPFHEAT_SPECTRAL_T_FLOOR)."""
    if method == "auto":
        method = "integral" if t < settings.HOPFHEAT_SPECTRAL_T_FLOOR else "spectral"
    if method == "spectral":
        return h_t_spectral(params, t, pt, trunc)
    if method == "intertwined":
        return h_t_intertwined(params, t, pt, spec, trunc)
    return h_t_integral(params, t, pt, spec)


# ── Medida ────────────────────────────────────────────────────────────────────


def cp_density_constant(params: ModelParams) -> float:
    """c_n = 8π^{2n+2}/Γ(2n), fijado por masa total unidad."""
    n = params.n
    return float(8 * math.exp((2 * n + 2) * math.log(math.pi) - gammaln(2 * n)))


def cp_measure_density(params: ModelParams, pt: CPPoint) -> float:
    n = params.n
    return (
        cp_density_constant(params)
        * math.sin(pt.r) ** (4 * n - 1)
        * math.cos(pt.r) ** 3
        * math.sin(2 * pt.canonical_phi)
    )


def cp_normalization_constant(
    params: ModelParams,
    t: float,
    spec: QuadratureSpec | None = None,
    trunc: Truncation | None = None,
) -> float:
    """c_n calibrado: 1 / ∫∫ h_t (sin r)^{4n−1}(cos r)^3 sin 2φ dr dφ."""
    if t <= 0:
        raise DomainError(details=f"t debe ser > 0 (t={t})")
    n = params.n
    spec = spec or settings.default_quadrature()

    def integrand(r: float, phi: NDArray[np.float64]) -> NDArray[np.float64]:
        h = h_t_spectral_grid(params, t, np.full_like(phi, r), phi, trunc)[0]
        return h * math.sin(r) ** (4 * n - 1) * math.cos(r) ** 3 * np.sin(2 * phi)

    result = integrate_nested(integrand, (0.0, math.pi / 2), (0.0, math.pi / 2), spec)
    constant = 1 / result.value
    logger.info("cp_normalization_calibrated", n=n, t=t, constant=constant, closed_form=cp_density_constant(params))
    return constant
