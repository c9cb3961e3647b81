"""
services/sphere_kernel.py — Núcleo subelíptico p_t(r, η) de S^{4n+3}.

Dos rutas independientes:
  - espectral: serie doble en (k, m) (SphereSeries), reevaluada con mpmath
    cuando el redondeo en doble precisión supera HOPFHEAT_SERIES_REL_TOL
  - integral: (e^{−t}/√(πt)) ∫_0^∞ sinh y · sin(ηy/2t)/sin η · e^{−(y²−η²)/4t} q_t(cos r cosh y) dy

y las piezas que las relacionan: el semigrupo del calor de SL(2), el núcleo CR
p_t^{CR} de S^{4n+1} y el entrelazamiento
    −e^{4nt}/(2π sin η cos r) · ∂_θ p_t^{CR}(r, θ)|_{θ=η} = p_t(r, η).

Sobre el eje real el integrando de la ruta integral tiene amplitud
e^{(η²−r²)/4t} frente a un valor del orden de e^{−d²/4t}: en η grande la
cancelación destruye todos los dígitos. Como el integrando es entero, la
integral se hace sobre la recta y = u + iκ de `contour_height`, con q_t
prolongado a argumento complejo (q_t_complex).

Uso:
    from models.params import CylPoint, ModelParams
    from services.sphere_kernel import p_t_integral, p_t_spectral

    params = ModelParams(n=1)
    p_t_spectral(params, 0.5, CylPoint(r=0.4, eta=1.0)).value
    p_t_integral(params, 0.05, CylPoint(r=0.0, eta=math.pi)).diagnostics["contour_height"]   # π
"""

import math
from collections.abc import Callable

import numpy as np
import structlog
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammaln

from config import settings
from middleware.error_handler import DomainError, NonConvergence
from models.entities import KernelEval
from models.params import CylPoint, Method, ModelParams, QuadratureSpec, Truncation
from services.quadrature import gaussian_tail_cutoff, integrate_finite, oscillatory_spec
from services.riemannian import q_t_complex
from services.spectral import CRSeries, SphereSeries

logger = structlog.get_logger(__name__)


# ── Ruta espectral ────────────────────────────────────────────────────────────


def p_t_spectral(
    params: ModelParams,
    t: float,
    pt: CylPoint,
    trunc: Truncation | None = None,
    rel_tol: float | None = None,
) -> KernelEval:
    """Serie espectral en un punto; si su cota de error supera rel_tol·|p_t| se reevalúa con mpmath."""
    rel_tol = settings.HOPFHEAT_SERIES_REL_TOL if rel_tol is None else rel_tol
    series = SphereSeries.cached(params, t, trunc)
    value = float(series.evaluate(pt.r, pt.eta, t)[0, 0])
    error = series.error_bound()
    diagnostics = {"terms_used": series.terms_used, "tail_bound": series.table.tail_bound}
    if error > rel_tol * abs(value):
        value, error, diagnostics = series.refine(pt.r, pt.eta, t, rel_tol)
    return KernelEval(value=value, error_estimate=error, method="spectral", diagnostics=diagnostics)


def p_t_spectral_grid(
    params: ModelParams,
    times: ArrayLike,
    r: ArrayLike,
    eta: ArrayLike,
    trunc: Truncation | None = None,
) -> NDArray[np.float64]:
    """p_t en los puntos (r_i, η_i) para cada t: array (len(times), len(puntos))."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    series = SphereSeries.cached(params, float(times.min()), trunc)
    return series.evaluate(r, eta, times)


# ── Ruta integral ─────────────────────────────────────────────────────────────

_HEIGHTS = np.linspace(0.0, math.pi, 129)


def contour_height(t: float, r: float, eta: float) -> float:
    """
    Altura κ ∈ [0, π] del contorno y = u + iκ con menor amplitud del integrando.

    En u = 0 la amplitud es e^{((κ−η)² − arccos(cos r cos κ)²)/4t}; las alturas
    intermedias pagan además el factor 1/sin η, que las formas reales κ = 0
    (η ≤ π/2) y κ = π (η ≥ π/2) absorben en sin(εu/2t)/sin ε.
    """
    if eta == 0.0:
        return 0.0
    if eta == math.pi:
        return math.pi
    cost = ((_HEIGHTS - eta) ** 2 - np.arccos(math.cos(r) * np.cos(_HEIGHTS)) ** 2) / (4 * t)
    penalty = np.full_like(_HEIGHTS, -math.log(math.sin(eta)))
    if eta <= math.pi / 2:
        penalty[0] = 0.0
    if eta >= math.pi / 2:
        penalty[-1] = 0.0
    return float(_HEIGHTS[np.argmin(cost + penalty)])


def residual_cutoff(n: int, rel_tol: float) -> float:
    """
    Corte en y para la cola y^{2n+2} 2^{2n} e^{−2ny} que deja el integrando
    en r = 0 una vez cancelado el factor gaussiano.
    """
    budget = math.log(1 / rel_tol)
    y = budget / (2 * n) + 1
    for _ in range(50):
        y = (budget + (2 * n + 2) * math.log(y) + 2 * n * math.log(2)) / (2 * n)
    return y


def p_t_integral(
    params: ModelParams,
    t: float,
    pt: CylPoint,
    spec: QuadratureSpec | None = None,
    value_abs_tol: float | None = None,
) -> KernelEval:
    """
    Representación integral de p_t sobre el núcleo riemanniano q_t.

    Con g(y) = sinh y · q_t(cos r cosh y), impar y entera, para todo κ ∈ [0, π]
        p_t = e^{−t}/(√(πt) sin η) ∫_0^∞ Im[g(u+iκ) e^{−(u+i(κ−η))²/4t}] du.
    κ = 0 es la forma original; κ = π la reflejada, real y sin cancelación en
    r = 0. El integrando se divide por su amplitud e^{log_amp}: `spec.abs_tol`
    se aplica a la integral normalizada y `value_abs_tol`, si se da, es una
    tolerancia absoluta sobre p_t.

    El error incluye el suelo de redondeo 16·eps·∫|integrando| y el error de
    q_t; si ese suelo supera la tolerancia pedida se lanza NonConvergence.
    """
    _check_integral_time(t)
    spec = spec or settings.default_quadrature()
    n = params.n
    r, eta = pt.r, pt.eta
    cos_r = math.cos(r)
    height = contour_height(t, r, eta)
    log_amp = -(2 * n + 1.5) * math.log(4 * math.pi * t) + (
        (height - eta) ** 2 - math.acos(cos_r * math.cos(height)) ** 2
    ) / (4 * t)
    scale = math.exp(-t + log_amp) / math.sqrt(math.pi * t)
    if value_abs_tol is not None:
        spec = spec.model_copy(update={"abs_tol": value_abs_tol / scale})

    y_max = max(gaussian_tail_cutoff(t, spec), residual_cutoff(n, spec.rel_tol))
    frequency = (height + abs(height - eta)) / (2 * t)
    quad_spec = oscillatory_spec(spec, y_max, frequency)
    q_error = [0.0]

    if height in (0.0, math.pi):
        sign = 1.0 if height == 0.0 else -1.0
        gap = eta if height == 0.0 else math.pi - eta
        sin_gap = math.sin(gap)

        def integrand(u: NDArray[np.float64]) -> NDArray[np.float64]:
            values, errors = q_t_complex(params, t, sign * cos_r * np.cosh(u), (gap * gap - u * u) / (4 * t) - log_amp)
            ratio = u / (2 * t) if sin_gap == 0.0 else np.sin(gap * u / (2 * t)) / sin_gap
            weight = np.sinh(u) * ratio
            q_error[0] = max(q_error[0], float(np.max(errors * np.abs(weight), initial=0.0)))
            return values.real * weight

    else:
        sin_eta = math.sin(eta)

        def integrand(u: NDArray[np.float64]) -> NDArray[np.float64]:
            y = u + 1j * height
            log_weight = ((height - eta) ** 2 - u * u) / (4 * t) - log_amp
            values, errors = q_t_complex(params, t, cos_r * np.cosh(y), log_weight)
            weight = np.sinh(y) * np.exp(-1j * u * (height - eta) / (2 * t)) / sin_eta
            q_error[0] = max(q_error[0], float(np.max(errors * np.abs(weight), initial=0.0)))
            return (values * weight).imag

    result = integrate_finite(integrand, 0.0, y_max, quad_spec)
    value = scale * result.value
    floor = scale * (16 * np.finfo(float).eps * result.abs_integral + q_error[0] * y_max)
    tolerance = max(scale * quad_spec.abs_tol, spec.rel_tol * abs(value))
    logger.debug(
        "p_t_integral",
        n=n,
        t=t,
        r=r,
        eta=eta,
        contour_height=height,
        evaluations=result.evaluations,
        y_max=y_max,
        floor=floor,
    )
    if floor > tolerance:
        raise NonConvergence(
            details=(
                f"p_t integral en t={t} (r={r}, η={eta}): suelo de redondeo {floor:.3e} "
                f"> tolerancia {tolerance:.3e} (valor {value:.3e}, κ={height:.3f})"
            )
        )
    return KernelEval(
        value=value,
        error_estimate=scale * result.error_estimate + floor,
        method="integral",
        diagnostics={
            "quad_evaluations": result.evaluations,
            "y_max": y_max,
            "contour_height": height,
            "cancellation_floor": floor,
        },
    )


def _check_integral_time(t: float) -> None:
    if t < settings.HOPFHEAT_INTEGRAL_T_FLOOR:
        raise DomainError(
            details=f"t={t} por debajo del suelo de la ruta integral {settings.HOPFHEAT_INTEGRAL_T_FLOOR}"
        )


def evaluate_sphere(
    params: ModelParams,
    t: float,
    pt: CylPoint,
    method: Method = "auto",
    spec: QuadratureSpec | None = None,
    trunc: Truncation | None = None,
) -> KernelEval:
    """Despacho por método; `auto` usa la serie allí donde converge (t ≥ HOPFHEAT_SPECTRAL_T_FLOOR)."""
    if method == "auto":
        method = "integral" if t < settings.HOPFHEAT_SPECTRAL_T_FLOOR else "spectral"
    if method == "spectral":
        return p_t_spectral(params, t, pt, trunc)
    if method == "integral":
        return p_t_integral(params, t, pt, spec)
    raise DomainError(details=f"método {method!r} no disponible para p_t")


# ── Semigrupo de SL(2) ────────────────────────────────────────────────────────


def sl2_semigroup_apply(
    f: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    t: float,
    eta: float,
    spec: QuadratureSpec | None = None,
    growth: float = 1.0,
) -> float:
    """
    (e^{−t}/√(πt)) ∫_0^∞ sinh r · sinh(ηr/2t)/sinh η · e^{−(r²+η²)/4t} f(r) dr.

    `growth` acota el crecimiento exponencial de f (más el de sinh r) y alarga el corte.
    """
    if t <= 0 or eta < 0:
        raise DomainError(details=f"se requiere t > 0 y η ≥ 0 (t={t}, η={eta})")
    spec = spec or settings.default_quadrature()
    upper = eta + gaussian_tail_cutoff(t, spec, growth=1.0 + max(growth, 0.0))

    if eta < settings.HOPFHEAT_SINGULAR_EPS:

        def kernel(r: NDArray[np.float64]) -> NDArray[np.float64]:
            return (r / (2 * t)) * np.exp(-r * r / (4 * t))

    else:
        sinh_eta = math.sinh(eta)

        def kernel(r: NDArray[np.float64]) -> NDArray[np.float64]:
            # sinh(ηr/2t)·e^{−(r²+η²)/4t} como diferencia de gaussianas
            return 0.5 * (np.exp(-((r - eta) ** 2) / (4 * t)) - np.exp(-((r + eta) ** 2) / (4 * t))) / sinh_eta

    def integrand(r: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.sinh(r) * kernel(r) * np.asarray(f(r), dtype=float)

    result = integrate_finite(integrand, 0.0, upper, spec)
    return math.exp(-t) / math.sqrt(math.pi * t) * result.value


# ── Núcleo CR y entrelazamiento ───────────────────────────────────────────────


def p_cr_t(n_cr: int, t: float, r: float, theta: float, trunc: Truncation | None = None) -> KernelEval:
    """p_t^{CR}(r, θ) en S^{4n+1}; par en θ."""
    _check_cr_point(r, theta)
    series = CRSeries.cached(ModelParams(n=n_cr), t, trunc)
    value = float(series.evaluate(r, theta, t)[0, 0])
    return KernelEval(
        value=value,
        error_estimate=series.error_bound(),
        method="spectral",
        diagnostics={"terms_used": series.terms_used, "tail_bound": series.table.tail_bound},
    )


def p_cr_theta_derivative(n_cr: int, t: float, r: float, theta: float, trunc: Truncation | None = None) -> KernelEval:
    """∂_θ p_t^{CR}(r, θ) derivando término a término: cos(mθ) → −m sin(mθ)."""
    _check_cr_point(r, theta)
    series = CRSeries.cached(ModelParams(n=n_cr), t, trunc)
    value = float(series.evaluate(r, theta, t, fiber_factor=CRSeries.theta_derivative_factor)[0, 0])
    return KernelEval(
        value=value,
        error_estimate=series.error_bound(),
        method="spectral",
        diagnostics={"terms_used": series.terms_used, "tail_bound": series.table.tail_bound},
    )


def _check_cr_point(r: float, theta: float) -> None:
    if not 0 <= r < math.pi / 2 or not -math.pi < theta <= math.pi:
        raise DomainError(details=f"(r, θ)=({r}, {theta}) fuera de [0, π/2)×(−π, π]")


def intertwine_check(params: ModelParams, t: float, pt: CylPoint, trunc: Truncation | None = None) -> float:
    """Residuo relativo del entrelazamiento entre p_t^{CR} y p_t en (r, η)."""
    if not 0 < pt.eta < math.pi:
        raise DomainError(details=f"el entrelazamiento requiere η ∈ (0, π) (η={pt.eta})")
    derivative = p_cr_theta_derivative(params.n, t, pt.r, pt.eta, trunc).value
    lhs = -math.exp(4 * params.n * t) / (2 * math.pi * math.sin(pt.eta) * math.cos(pt.r)) * derivative
    rhs = p_t_spectral(params, t, pt, trunc).value
    residual = abs(lhs - rhs) / abs(rhs)
    logger.debug("intertwine_check", n=params.n, t=t, r=pt.r, eta=pt.eta, residual=residual)
    return residual


# ── Medida ────────────────────────────────────────────────────────────────────


def cyl_measure_density(params: ModelParams, pt: CylPoint) -> float:
    """(8π^{2n+1}/Γ(2n)) (sin r)^{4n−1} (cos r)^3 (sin η)^2."""
    n = params.n
    constant = 8 * math.exp((2 * n + 1) * math.log(math.pi) - gammaln(2 * n))
    return constant * math.sin(pt.r) ** (4 * n - 1) * math.cos(pt.r) ** 3 * math.sin(pt.eta) ** 2
