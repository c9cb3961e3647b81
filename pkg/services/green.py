"""
services/green.py — Función de Green del sub-laplaciano conforme −L + 4n(n+1).

    G(r, η) = Γ(n)Γ(n+1) / (8π^{2n+2} (1 − 2 cos r cos η + cos² r)^{n+1})

y su comprobación como transformada de Laplace en tiempo de p_t:
    G = ∫_0^∞ p_t(r, η) e^{−4n(n+1)t} dt.
"""

import math

import numpy as np
import structlog
from numpy.typing import NDArray
from scipy.special import gammaln

from config import settings
from middleware.error_handler import DomainError, PoleSingularity
from models.entities import KernelEval
from models.params import CylPoint, ModelParams, QuadratureSpec, Truncation
from services.quadrature import integrate_finite
from services.riemannian import sphere_volume
from services.sphere_kernel import p_t_spectral
from services.spectral import SphereSeries

logger = structlog.get_logger(__name__)


def green_sphere(params: ModelParams, pt: CylPoint) -> float:
    n = params.n
    cos_r = math.cos(pt.r)
    denominator = 1 - 2 * cos_r * math.cos(pt.eta) + cos_r * cos_r
    if denominator <= settings.HOPFHEAT_POLE_EPS:
        raise PoleSingularity(details=f"(r, η)=({pt.r}, {pt.eta}): denominador {denominator:.3e}")
    log_value = (
        gammaln(n) + gammaln(n + 1) - math.log(8) - (2 * n + 2) * math.log(math.pi) - (n + 1) * math.log(denominator)
    )
    return math.exp(log_value)


def green_transform(
    params: ModelParams,
    pt: CylPoint,
    t_min: float = 0.02,
    t_max: float = 20.0,
    spec: QuadratureSpec | None = None,
    trunc: Truncation | None = None,
) -> KernelEval:
    """
    ∫_0^∞ p_t e^{−4n(n+1)t} dt: cuadratura en [t_min, t_max] con p_t espectral,
    cola exacta del término de equilibrio y la cabeza ∫_0^{t_min} estimada como
    t_min·p_{t_min}.

    La cabeza es una estimación, no una cota: sólo acota cuando p_s crece en
    (0, t_min], lo que ocurre lejos del origen, donde p_s ~ e^{−d²/4s}. Cerca del
    polo p_s ~ s^{−(2n+2)} y la integral de la cabeza diverge; diagnostics
    lleva "head_estimate" y la advertencia "green_head_unreliable" cuando
    p_{t_min/2} supera p_{t_min}.
    """
    if not 0 < t_min < t_max:
        raise DomainError(details=f"ventana temporal inválida [{t_min}, {t_max}]")
    spec = spec or settings.default_quadrature()
    n = params.n
    shift = 4.0 * n * (n + 1)
    series = SphereSeries.cached(params, t_min, trunc)

    def integrand(times: NDArray[np.float64]) -> NDArray[np.float64]:
        return series.evaluate(pt.r, pt.eta, times)[:, 0] * np.exp(-shift * times)

    middle = integrate_finite(integrand, t_min, t_max, spec)
    tail = math.exp(-shift * t_max) / (shift * sphere_volume(params))
    head_estimate = t_min * float(series.evaluate(pt.r, pt.eta, t_min)[0, 0])
    head_monotone = _head_is_increasing(params, pt, t_min, trunc)
    if not head_monotone:
        logger.warning("green_head_unreliable", n=n, r=pt.r, eta=pt.eta, t_min=t_min)
    value = middle.value + tail
    logger.debug(
        "green_transform",
        n=n,
        r=pt.r,
        eta=pt.eta,
        middle=middle.value,
        tail=tail,
        head_estimate=head_estimate,
    )
    return KernelEval(
        value=value,
        error_estimate=middle.error_estimate + head_estimate + series.error_bound() * (t_max - t_min),
        method="spectral",
        diagnostics={
            "quad_evaluations": middle.evaluations,
            "head_estimate": head_estimate,
            "head_monotone": head_monotone,
            "tail": tail,
        },
    )


def _head_is_increasing(params: ModelParams, pt: CylPoint, t_min: float, trunc: Truncation | None) -> bool:
    # la serie en coma flotante pierde el valor relativo en t_min/2; p_t_spectral lo refina
    early = p_t_spectral(params, 0.5 * t_min, pt, trunc).value
    late = p_t_spectral(params, t_min, pt, trunc).value
    return early <= late


def green_transform_check(
    params: ModelParams,
    pt: CylPoint,
    t_min: float = 0.02,
    t_max: float = 20.0,
    spec: QuadratureSpec | None = None,
) -> float:
    """Residuo relativo |transformada − G| / G."""
    closed = green_sphere(params, pt)
    transform = green_transform(params, pt, t_min, t_max, spec)
    residual = abs(transform.value - closed) / closed
    logger.debug("green_transform_check", n=params.n, r=pt.r, eta=pt.eta, residual=residual)
    return residual
