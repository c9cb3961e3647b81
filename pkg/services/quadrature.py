"""
services/quadrature.py — Cuadratura adaptativa compartida por todos los núcleos.

Gauss–Kronrod 7/15 con bisección por niveles: en cada ronda se evalúan
todos los paneles pendientes en una sola llamada vectorizada al integrando,
así que `f` recibe un ndarray de nodos y debe devolver un ndarray de la misma
forma (o un escalar, que se difunde).

Un panel se acepta cuando su error estimado cabe en su fracción de la
tolerancia global max(abs_tol, rel_tol·|I|), o cuando está limitado por
redondeo. Si se alcanza max_depth (o max_panels) con error por encima de la
tolerancia se lanza NonConvergence.

Uso:
    import numpy as np
    from services.quadrature import integrate_finite, integrate_gaussian_tail

    integrate_finite(np.sin, 0.0, np.pi).value              # 2.0
    integrate_gaussian_tail(lambda y: y, 0.25).value        # 0.5
"""

import math
from collections.abc import Callable

import numpy as np
import structlog
from numpy.typing import NDArray

from config import settings
from middleware.error_handler import DomainError, NonConvergence
from models.entities import QuadResult
from models.params import QuadratureSpec

logger = structlog.get_logger(__name__)

Integrand = Callable[[NDArray[np.float64]], NDArray[np.float64] | float]

# ── Regla de Gauss–Kronrod 7/15 (nodos positivos, mismo orden que QUADPACK qk15) ──

_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)


def _expand_rule() -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    nodes = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
    wk = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
    wg_half = np.zeros(8)
    wg_half[1::2] = _WG
    wg = np.concatenate([wg_half[:7], [wg_half[7]], wg_half[6::-1]])
    return nodes, wk, wg


_NODES, _WK15, _WG7 = _expand_rule()
_EPS = np.finfo(float).eps
_UFLOW = np.finfo(float).tiny


# ── API pública ───────────────────────────────────────────────────────────────


def integrate_finite(
    f: Integrand,
    a: float,
    b: float,
    spec: QuadratureSpec | None = None,
) -> QuadResult:
    """∫_a^b f por bisección adaptativa con estimación de error embebida."""
    spec = spec or settings.default_quadrature()
    if not (math.isfinite(a) and math.isfinite(b)) or b < a:
        raise DomainError(details=f"intervalo inválido [{a}, {b}]")
    if a == b:
        return QuadResult(value=0.0, error_estimate=0.0, evaluations=0, abs_integral=0.0)

    width = b - a
    lo = np.array([a], dtype=float)
    hi = np.array([b], dtype=float)
    acc_value = 0.0
    acc_error = 0.0
    acc_abs = 0.0
    evaluations = 0
    roundoff_panels = 0

    for depth in range(spec.max_depth + 1):
        kronrod, error, limited, resabs = _gk15(f, lo, hi)
        evaluations += 15 * lo.size
        estimate = acc_value + float(kronrod.sum())
        tol = max(spec.abs_tol, spec.rel_tol * abs(estimate))
        local = tol * (hi - lo) / width
        done = (error <= local) | limited | ((hi - lo) <= 8 * _EPS * width)
        roundoff_panels += int(np.count_nonzero(limited & (error > local)))

        acc_value += float(kronrod[done].sum())
        acc_error += float(error[done].sum())
        acc_abs += float(resabs[done].sum())
        lo, hi = lo[~done], hi[~done]
        kronrod, error, resabs = kronrod[~done], error[~done], resabs[~done]
        if lo.size == 0:
            break

        if depth == spec.max_depth or 2 * lo.size > spec.max_panels:
            value = acc_value + float(kronrod.sum())
            total_error = acc_error + float(error.sum())
            if total_error <= max(spec.abs_tol, spec.rel_tol * abs(value)):
                return QuadResult(
                    value=value,
                    error_estimate=total_error,
                    evaluations=evaluations,
                    abs_integral=acc_abs + float(resabs.sum()),
                )
            raise NonConvergence(
                details=(
                    f"[{a}, {b}] profundidad={depth} paneles={lo.size} "
                    f"valor={value:.6e} error={total_error:.3e} tol={tol:.3e}"
                )
            )

        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])

    if roundoff_panels:
        logger.warning(
            "quadrature_roundoff_limited",
            a=a,
            b=b,
            panels=roundoff_panels,
            value=acc_value,
            error=acc_error,
        )
    logger.debug("quadrature_converged", a=a, b=b, evaluations=evaluations, error=acc_error)
    return QuadResult(
        value=acc_value, error_estimate=acc_error, evaluations=evaluations, abs_integral=acc_abs
    )


def gaussian_tail_cutoff(t: float, spec: QuadratureSpec | None = None, growth: float = 0.0) -> float:
    """y_max = tail_cutoff_sigma·√(4t) + 4t·growth para un peso e^{−y²/4t} y f ~ e^{growth·y}."""
    spec = spec or settings.default_quadrature()
    return spec.tail_cutoff_sigma * math.sqrt(4 * t) + 4 * t * max(growth, 0.0)


def integrate_gaussian_tail(
    f: Integrand,
    t: float,
    spec: QuadratureSpec | None = None,
    growth: float = 0.0,
) -> QuadResult:
    """∫_0^∞ f(y) e^{−y²/4t} dy truncada en gaussian_tail_cutoff(t, spec, growth)."""
    if t <= 0:
        raise DomainError(details=f"t debe ser > 0 (t={t})")
    spec = spec or settings.default_quadrature()
    y_max = gaussian_tail_cutoff(t, spec, growth)

    def weighted(y: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.asarray(f(y), dtype=float) * np.exp(-y * y / (4 * t))

    return integrate_finite(weighted, 0.0, y_max, spec)


def integrate_nested(
    f: Callable[[float, NDArray[np.float64]], NDArray[np.float64]],
    outer: tuple[float, float],
    inner: tuple[float, float],
    spec: QuadratureSpec | None = None,
) -> QuadResult:
    """∫∫ f(x, y) dy dx como dos cuadraturas 1-D anidadas; f se vectoriza en y."""
    spec = spec or settings.default_quadrature()
    inner_spec = spec.tightened(factor=0.1)
    inner_error = [0.0]
    inner_evaluations = [0]

    def outer_integrand(xs: NDArray[np.float64]) -> NDArray[np.float64]:
        out = np.empty_like(xs)
        for i, x in enumerate(xs):
            res = integrate_finite(lambda y, x=x: f(x, y), inner[0], inner[1], inner_spec)
            out[i] = res.value
            inner_error[0] = max(inner_error[0], res.error_estimate)
            inner_evaluations[0] += res.evaluations
        return out

    result = integrate_finite(outer_integrand, outer[0], outer[1], spec)
    return QuadResult(
        value=result.value,
        error_estimate=result.error_estimate + inner_error[0] * (outer[1] - outer[0]),
        evaluations=inner_evaluations[0],
        abs_integral=result.abs_integral,
    )


def oscillatory_spec(spec: QuadratureSpec, y_max: float, frequency: float) -> QuadratureSpec:
    """Amplía max_depth y max_panels según el número de oscilaciones y_max·ω/2π."""
    oscillations = y_max * abs(frequency) / (2 * math.pi)
    extra_depth = int(math.ceil(math.log2(1 + oscillations)))
    return spec.model_copy(
        update={
            "max_depth": spec.max_depth + extra_depth,
            "max_panels": max(spec.max_panels, int(16 * oscillations) + 64),
        }
    )


# ── Implementación interna ────────────────────────────────────────────────────


def _gk15(
    f: Integrand, lo: NDArray[np.float64], hi: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.bool_], NDArray[np.float64]]:
    """Regla 7/15 sobre todos los paneles; devuelve (K15, error, limitado_por_redondeo, ∫|f|)."""
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = center[:, None] + half[:, None] * _NODES[None, :]
    raw = np.asarray(f(nodes.ravel()), dtype=float)
    values = np.broadcast_to(raw, (nodes.size,)).reshape(nodes.shape)
    if not np.all(np.isfinite(values)):
        bad = nodes[~np.isfinite(values)]
        raise DomainError(details=f"integrando no finito en x={bad[:3].tolist()}")

    kronrod = half * (values @ _WK15)
    gauss = half * (values @ _WG7)
    resabs = np.abs(half) * (np.abs(values) @ _WK15)
    mean = kronrod / np.where(half == 0, 1.0, 2 * half)
    resasc = np.abs(half) * (np.abs(values - mean[:, None]) @ _WK15)

    diff = np.abs(kronrod - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(
            (resasc != 0) & (diff != 0),
            resasc * np.minimum(1.0, (200 * diff / np.where(resasc == 0, 1.0, resasc)) ** 1.5),
            diff,
        )
    floor = 50 * _EPS * resabs
    limited = (resabs > _UFLOW / (50 * _EPS)) & (scaled <= floor)
    error = np.where(resabs > _UFLOW / (50 * _EPS), np.maximum(floor, scaled), scaled)
    return kronrod, error, limited, resabs
