"""
services/riemannian.py — Núcleo del calor riemanniano q_t de S^{4n+3}.

    q_t(x) = Γ(2n+1)/(2π^{2n+2}) Σ_m (m+2n+1) e^{−m(m+4n+2)t} C_m^{2n+1}(x)

con x = cos δ en [−1, 1] o, para la representación integral, x = cos r·cosh y > 1.
En x > 1 los términos crecen como ρ^m (ρ = x + √(x²−1)), así que la suma se hace
sobre C̃_m = C_m/ρ^m y el factor ρ^m entra en el exponente junto con un peso
logarítmico opcional; eso permite evaluar e^{−y²/4t}·q_t(cos r cosh y) sin
desbordar cuando ambos factores son enormes.

Cota de término: C_m^λ(cosh s) ≤ C_m^λ(1)·e^{ms} (coeficientes positivos de la
función generatriz).

Uso:
    from services.riemannian import q_t, q_t_complex, q_t_small_time, sphere_volume

    q_t(ModelParams(n=1), t=0.5, x=1.0).value
    values, errors = q_t_complex(ModelParams(n=1), 0.05, [2.0 + 0.5j, -1.5])
"""

import math

import numpy as np
import structlog
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammaln, logsumexp

from config import settings
from middleware.error_handler import DomainError, SeriesDivergenceGuard
from models.entities import KernelEval
from models.params import ModelParams, Truncation
from services.orthopoly import log_binom

logger = structlog.get_logger(__name__)


def sphere_volume(params: ModelParams) -> float:
    """Volumen de S^{4n+3}: 2π^{2n+2}/Γ(2n+2)."""
    n = params.n
    return float(2 * math.exp((2 * n + 2) * math.log(math.pi) - gammaln(2 * n + 2)))


def q_t(params: ModelParams, t: float, x: float, trunc: Truncation | None = None) -> KernelEval:
    """Serie de Gegenbauer de q_t en un argumento x ≥ −1."""
    values, tails, terms = q_t_scaled(params, t, np.array([x], dtype=float), 0.0, trunc)
    return KernelEval(
        value=float(values[0]),
        error_estimate=float(tails[0]) + terms * np.finfo(float).eps * abs(float(values[0])),
        method="spectral",
        diagnostics={"terms_used": terms, "tail_bound": float(tails[0])},
    )


def q_t_scaled(
    params: ModelParams,
    t: float,
    x: ArrayLike,
    log_weight: ArrayLike = 0.0,
    trunc: Truncation | None = None,
) -> tuple[NDArray[np.float64], NDArray[np.float64], int]:
    """
    e^{log_weight}·q_t(x) vectorizado en x.

    Devuelve (valores, cota_de_cola_por_punto, términos usados).
    """
    if t <= 0:
        raise DomainError(details=f"t debe ser > 0 (t={t})")
    trunc = trunc or settings.default_truncation()
    x = np.asarray(x, dtype=float)
    if np.any(x < -1 - 1e-12):
        raise DomainError(details=f"q_t requiere x ≥ −1 (min x={x.min()})")
    x = np.maximum(x, -1.0)
    log_weight = np.broadcast_to(np.asarray(log_weight, dtype=float), x.shape)

    n = params.n
    lam = 2.0 * n + 1
    s = np.arccosh(np.maximum(x, 1.0))  # log ρ; 0 en [−1, 1]
    m_max = _cutoff_index(n, t, float(s.max(initial=0.0)), trunc)

    rho_inv = np.exp(-s)
    x_scaled = x * rho_inv  # x/ρ ≤ 1
    rho_inv2 = rho_inv * rho_inv

    log_pref = gammaln(2 * n + 1) - math.log(2) - (2 * n + 2) * math.log(math.pi)
    total = np.zeros_like(x)
    prev2 = np.zeros_like(x)
    prev = np.ones_like(x)  # C̃_0
    for m in range(m_max + 1):
        if m == 0:
            current = prev
        elif m == 1:
            current = 2 * lam * x_scaled
        else:
            current = (2 * x_scaled * (m + lam - 1) * prev - (m + 2 * lam - 2) * rho_inv2 * prev2) / m
        exponent = log_pref - m * (m + 4 * n + 2) * t + m * s + log_weight
        total += (m + 2 * n + 1) * current * np.exp(exponent)
        if m >= 1:
            prev2, prev = prev, current

    m_next = m_max + 1
    log_next = (
        log_pref
        + math.log(m_next + 2 * n + 1)
        + float(log_binom(m_next + 4 * n + 1, m_next))
        - m_next * (m_next + 4 * n + 2) * t
        + m_next * s
        + log_weight
    )
    tails = 2 * np.exp(log_next)
    return total, tails, m_max + 1


def _cutoff_index(n: int, t: float, s_max: float, trunc: Truncation) -> int:
    """Primer m tras el pico cuya cota cae por debajo de term_tol·(cota en el pico)."""
    m = np.arange(trunc.max_index + 1, dtype=float)
    log_term = np.log(m + 2 * n + 1) + log_binom(m + 4 * n + 1, m) - m * (m + 4 * n + 2) * t + m * s_max
    peak = int(np.argmax(log_term))
    threshold = float(logsumexp(log_term[: peak + 1])) + math.log(trunc.term_tol)
    below = np.flatnonzero(log_term[peak:] < threshold)
    if below.size == 0:
        raise SeriesDivergenceGuard(
            details=f"q_t: cota de término creciente hasta max_index={trunc.max_index} (t={t}, s={s_max:.3f})"
        )
    return peak + int(below[0])


def q_t_small_time(params: ModelParams, t: float, delta: float) -> float:
    """Desarrollo de dos términos de q_t(cos δ) para t pequeño, δ ∈ [0, π)."""
    if t <= 0:
        raise DomainError(details=f"t debe ser > 0 (t={t})")
    if not 0 <= delta < math.pi:
        raise DomainError(details=f"δ={delta} fuera de [0, π)")
    n = params.n
    if delta < 1e-4:
        ratio = 1 + delta * delta / 6
        curvature = 1 / 3 + delta * delta / 45
    else:
        sin_d = math.sin(delta)
        ratio = delta / sin_d
        curvature = (sin_d - delta * math.cos(delta)) / (delta * delta * sin_d)
    correction = 1 + ((2 * n + 1) ** 2 - 2 * n * (2 * n + 1) * curvature) * t
    return (4 * math.pi * t) ** (-(2 * n + 1.5)) * ratio ** (2 * n + 1) * math.exp(-delta * delta / (4 * t)) * correction


# ── Prolongación compleja ─────────────────────────────────────────────────────

_CAUCHY_NODES = 64
_CHUNK = 4096


def q_t_complex(
    params: ModelParams,
    t: float,
    z: ArrayLike,
    log_weight: ArrayLike = 0.0,
    trunc: Truncation | None = None,
) -> tuple[NDArray[np.complex128], NDArray[np.float64]]:
    """
    e^{log_weight}·q_t(z) para z complejo, vectorizado; q_t es entera en z.

    Con M = 2n+1 y t < π/(2M) se usa la suma de imágenes
        q_t(z) = e^{M²t} (2π)^{−M} (4πt)^{−1/2} d^M/dz^M Σ_k e^{−(arccos z + 2πk)²/4t},
    derivada por la fórmula integral de Cauchy; para t mayores, la serie de
    Gegenbauer con argumento complejo. Devuelve (valores, error absoluto por punto).
    """
    if t <= 0:
        raise DomainError(details=f"t debe ser > 0 (t={t})")
    z = np.asarray(z, dtype=complex)
    log_weight = np.broadcast_to(np.asarray(log_weight, dtype=float), z.shape)
    order = 2 * params.n + 1
    if t < math.pi / (2 * order):
        values, errors = _q_t_image_sum(order, t, z.ravel(), log_weight.ravel())
    else:
        values, errors = _q_t_series_complex(params.n, t, z.ravel(), log_weight.ravel(), trunc)
    return values.reshape(z.shape), errors.reshape(z.shape)


def _q_t_series_complex(
    n: int, t: float, z: NDArray[np.complex128], log_weight: NDArray[np.float64], trunc: Truncation | None
) -> tuple[NDArray[np.complex128], NDArray[np.float64]]:
    """Serie de Gegenbauer en z complejo; C̃_m = C_m/ρ^m con ρ = e^{arccosh z}, |ρ| ≥ 1."""
    trunc = trunc or settings.default_truncation()
    lam = 2.0 * n + 1
    s = np.arccosh(z)  # rama principal: Re s ≥ 0
    m_max = _cutoff_index(n, t, float(s.real.max(initial=0.0)), trunc)

    rho_inv = np.exp(-s)
    x_scaled = z * rho_inv
    rho_inv2 = rho_inv * rho_inv

    log_pref = gammaln(2 * n + 1) - math.log(2) - (2 * n + 2) * math.log(math.pi)
    total = np.zeros_like(z)
    magnitude = np.zeros(z.shape)
    prev2 = np.zeros_like(z)
    prev = np.ones_like(z)
    for m in range(m_max + 1):
        if m == 0:
            current = prev
        elif m == 1:
            current = 2 * lam * x_scaled
        else:
            current = (2 * x_scaled * (m + lam - 1) * prev - (m + 2 * lam - 2) * rho_inv2 * prev2) / m
        term = (m + 2 * n + 1) * current * np.exp(log_pref - m * (m + 4 * n + 2) * t + m * s + log_weight)
        total += term
        magnitude += np.abs(term)
        if m >= 1:
            prev2, prev = prev, current

    m_next = m_max + 1
    log_next = (
        log_pref
        + math.log(m_next + 2 * n + 1)
        + float(log_binom(m_next + 4 * n + 1, m_next))
        - m_next * (m_next + 4 * n + 2) * t
        + m_next * s.real
        + log_weight
    )
    errors = 2 * np.exp(log_next) + 16 * np.finfo(float).eps * magnitude
    return total, errors


def _q_t_image_sum(
    order: int, t: float, z: NDArray[np.complex128], log_weight: NDArray[np.float64]
) -> tuple[NDArray[np.complex128], NDArray[np.float64]]:
    """
    Derivada M-ésima de la suma de imágenes por la regla del trapecio sobre un
    círculo de radio M/κ, con κ la tasa local de variación del exponente.
    El error suma la diferencia con la regla de la mitad de nodos y el redondeo
    de las exponenciales.
    """
    values = np.empty_like(z)
    errors = np.empty(z.shape)
    for start in range(0, z.size, _CHUNK):
        part = slice(start, start + _CHUNK)
        values[part], errors[part] = _cauchy_derivative(order, t, z[part], log_weight[part])
    return values, errors


def _cauchy_derivative(
    order: int, t: float, z: NDArray[np.complex128], log_weight: NDArray[np.float64]
) -> tuple[NDArray[np.complex128], NDArray[np.float64]]:
    eps = np.finfo(float).eps
    delta0 = np.arccos(z)
    sin0 = np.abs(np.sin(delta0))
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(sin0 > 1e-8, np.abs(delta0) / (2 * t * sin0), 1 / (2 * t))
    # cerca de z = −1 las dos imágenes vecinas se compensan y la tasa queda acotada
    rate = np.minimum(rate, math.pi**2 / (4 * t * t) + 1 / (2 * t))
    radius = order / rate

    angles = 2 * math.pi * np.arange(_CAUCHY_NODES) / _CAUCHY_NODES
    nodes = z[:, None] + radius[:, None] * np.exp(1j * angles)[None, :]
    delta = np.arccos(nodes)
    images = math.ceil(0.5 + math.sqrt(0.25 + 40 * t / math.pi**2)) + 1

    f = np.zeros_like(nodes)
    # exp(x) redondea con error relativo eps·|x|: cada imagen pesa por su módulo
    mass = np.zeros(nodes.shape)
    for k in range(-images, images + 1):
        exponent = log_weight[:, None] - (delta + 2 * math.pi * k) ** 2 / (4 * t)
        term = np.exp(exponent)
        f += term
        mass += np.abs(term) * (1 + np.abs(exponent))

    phase = np.exp(-1j * order * angles)
    full = (f @ phase) / _CAUCHY_NODES
    half = (f[:, ::2] @ phase[::2]) / (_CAUCHY_NODES // 2)
    roundoff = eps * np.max(mass, axis=1)

    log_pref = order * order * t - order * math.log(2 * math.pi) - 0.5 * math.log(4 * math.pi * t)
    scale = math.exp(log_pref) * math.factorial(order) / radius**order
    return scale * full, scale * (np.abs(full - half) + roundoff)
