"""
services/orthopoly.py — Polinomios de Jacobi y Gegenbauer por recurrencia de tres términos.

Normalización estándar (Rodrigues): P_k^{α,β}(1) = binom(k+α, k),
C_m^λ(1) = binom(m+2λ−1, m). Los argumentos no se recortan a [−1, 1]:
la representación integral evalúa en cos r · cosh y ≥ 1.

Uso:
    from models.params import JacobiIndex
    from services.orthopoly import jacobi_p, jacobi_p_all, vertical_character

    jacobi_p(JacobiIndex(k=2, alpha=1, beta=2), 1.0)   # 3.0
    table = jacobi_p_all(10, 1.0, 2.0, x)              # shape (11, *x.shape)

    with mpmath.workdps(50):
        exact = jacobi_p_all_precise(10, 1, 2, mpmath.mpf("0.3"))
"""

import mpmath
import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammaln

from config import settings
from models.params import GegenbauerIndex, JacobiIndex

# ── API pública ───────────────────────────────────────────────────────────────


def jacobi_p_all(kmax: int, alpha: float, beta: float, x: ArrayLike) -> NDArray[np.float64]:
    """P_0 … P_kmax de Jacobi en x, apiladas en el primer eje."""
    x = np.asarray(x, dtype=float)
    out = np.empty((kmax + 1, *x.shape))
    out[0] = 1.0
    if kmax == 0:
        return out
    out[1] = (alpha + 1) + (alpha + beta + 2) * (x - 1) / 2
    ab = alpha + beta
    a2b2 = alpha * alpha - beta * beta
    for k in range(2, kmax + 1):
        s = 2 * k + ab
        a = 2 * k * (k + ab) * (s - 2)
        b = (s - 1) * (s * (s - 2) * x + a2b2)
        c = 2 * (k + alpha - 1) * (k + beta - 1) * s
        out[k] = (b * out[k - 1] - c * out[k - 2]) / a
    return out


def jacobi_p_all_precise(kmax: int, alpha: int, beta: int, x: mpmath.mpf) -> list[mpmath.mpf]:
    """
    Misma recurrencia que jacobi_p_all en aritmética de mpmath, para α y β
    enteros: los coeficientes son enteros exactos y la precisión es la del
    contexto activo (mpmath.workdps).
    """
    out = [mpmath.mpf(1)]
    if kmax == 0:
        return out
    out.append((alpha + 1) + (alpha + beta + 2) * (x - 1) / 2)
    ab = alpha + beta
    a2b2 = alpha * alpha - beta * beta
    for k in range(2, kmax + 1):
        s = 2 * k + ab
        a = 2 * k * (k + ab) * (s - 2)
        b_lin = (s - 1) * s * (s - 2)
        b_const = (s - 1) * a2b2
        c = 2 * (k + alpha - 1) * (k + beta - 1) * s
        out.append(((b_lin * x + b_const) * out[-1] - c * out[-2]) / a)
    return out


def jacobi_p(idx: JacobiIndex, x: ArrayLike) -> float | NDArray[np.float64]:
    values = jacobi_p_all(idx.k, idx.alpha, idx.beta, x)[idx.k]
    return float(values) if values.ndim == 0 else values


def jacobi_norm_sq(idx: JacobiIndex) -> float:
    """∫_{−1}^{1} P_k² (1−x)^α (1+x)^β dx."""
    k, a, b = idx.k, idx.alpha, idx.beta
    if k == 0:
        # Forma de Beta: evita Γ(0)/0 cuando α+β = −1
        log_val = (a + b + 1) * np.log(2) + gammaln(a + 1) + gammaln(b + 1) - gammaln(a + b + 2)
        return float(np.exp(log_val))
    log_val = (
        (a + b + 1) * np.log(2)
        - np.log(2 * k + a + b + 1)
        + gammaln(k + a + 1)
        + gammaln(k + b + 1)
        - gammaln(k + 1)
        - gammaln(k + a + b + 1)
    )
    return float(np.exp(log_val))


def gegenbauer_c_all(mmax: int, lam: float, x: ArrayLike) -> NDArray[np.float64]:
    """C_0^λ … C_mmax^λ en x, apiladas en el primer eje."""
    x = np.asarray(x, dtype=float)
    out = np.empty((mmax + 1, *x.shape))
    out[0] = 1.0
    if mmax == 0:
        return out
    out[1] = 2 * lam * x
    for m in range(2, mmax + 1):
        out[m] = (2 * x * (m + lam - 1) * out[m - 1] - (m + 2 * lam - 2) * out[m - 2]) / m
    return out


def gegenbauer_c(idx: GegenbauerIndex, x: ArrayLike) -> float | NDArray[np.float64]:
    values = gegenbauer_c_all(idx.m, idx.lam, x)[idx.m]
    return float(values) if values.ndim == 0 else values


def vertical_character(m: int, eta: ArrayLike) -> float | NDArray[np.float64]:
    """
    sin((m+1)η)/sin η para η ∈ [0, π], con los límites (m+1) en η = 0
    y (−1)^m (m+1) en η = π. Cerca de los extremos (|sin η| < umbral)
    se usa el desarrollo de segundo orden.
    """
    eta_arr = np.asarray(eta, dtype=float)
    s = np.sin(eta_arr)
    near = np.abs(s) < settings.HOPFHEAT_SINGULAR_EPS
    safe_s = np.where(near, 1.0, s)
    out = np.sin((m + 1) * eta_arr) / safe_s
    if np.any(near):
        at_pi = eta_arr > np.pi / 2
        eps = np.where(at_pi, np.pi - eta_arr, eta_arr)
        limit = (m + 1) * (1 - m * (m + 2) * eps * eps / 6)
        limit = np.where(at_pi, (-1) ** m * limit, limit)
        out = np.where(near, limit, out)
    return float(out) if out.ndim == 0 else out


def log_binom(top: ArrayLike, bottom: ArrayLike) -> NDArray[np.float64]:
    """log binom(top, bottom) vía gammaln (argumentos reales)."""
    top = np.asarray(top, dtype=float)
    bottom = np.asarray(bottom, dtype=float)
    return gammaln(top + 1) - gammaln(bottom + 1) - gammaln(top - bottom + 1)
