"""
services/spectral.py — Selección de modos y evaluación vectorizada de series dobles.

Las tres series del paquete (p_t en S^{4n+3}, p_t^{CR} en S^{4n+1} y h_t en
CP^{2n+1}) tienen la misma forma

    Σ_{k,m} c_{k,m} e^{−λ_{k,m} t} F_m(fibra) (cos r)^{a·m} P_k^{2n−1, β(m)}(cos 2r)

y sólo difieren en c, λ, β y el factor de fibra F_m. `SpectralSeries` fija el
algoritmo; cada subclase aporta esas piezas.

Truncado: para t ≥ t_min cada modo está acotado por
c_{k,m}·e^{−λ t_min}·sup|F_m|·binom(k+max(α,β), k). Las cotas se calculan en
espacio logarítmico sobre el rectángulo (k, m) ≤ (k_cap, m_cap); se retienen
los modos cuya cota supera term_tol·S (S = suma de cotas) y la cola informada
es la suma de las descartadas más una estimación geométrica más allá del
rectángulo. Si esa frontera no es despreciable se duplican los topes hasta
max_index; agotados, SeriesDivergenceGuard.

Cerca del punto antipodal el núcleo es del orden de e^{−π²/4t} mientras la
suma de cotas S crece como t^{−(2n+3)}: en doble precisión el redondeo
len·eps·S puede superar al valor. `refine` reevalúa entonces un punto con
mpmath (coeficientes enteros exactos y recurrencias en precisión extendida).

Uso:
    from services.spectral import SphereSeries

    series = SphereSeries.cached(ModelParams(n=1), t_min=0.5)
    values = series.evaluate(r=[0.3, 0.7], fiber=[1.0, 2.0], times=[0.5, 1.0])   # (2, 2)
"""

import math
from abc import ABC, abstractmethod
from collections.abc import Callable
from functools import lru_cache
from typing import Any

from typing_extensions import Self

import mpmath
import numpy as np
import structlog
from numpy.typing import ArrayLike, NDArray
from scipy.special import eval_legendre, gammaln, logsumexp

from config import settings
from middleware.error_handler import SeriesDivergenceGuard
from models.entities import ModeTable
from models.params import ModelParams, Truncation
from services.orthopoly import jacobi_p_all, jacobi_p_all_precise, log_binom, vertical_character

logger = structlog.get_logger(__name__)

FiberFactor = Callable[[int, NDArray[np.float64]], NDArray[np.float64]]


# ── Selección de modos ────────────────────────────────────────────────────────


def select_modes(series: "SpectralSeries", t_min: float, trunc: Truncation | None = None) -> ModeTable:
    """Modos (k, m) cuya cota en t_min supera term_tol·S, ordenados por diagonales k+m."""
    trunc = trunc or settings.default_truncation()
    if t_min < settings.HOPFHEAT_SPECTRAL_T_FLOOR:
        raise SeriesDivergenceGuard(
            details=f"{series.name}: t={t_min} por debajo del suelo espectral {settings.HOPFHEAT_SPECTRAL_T_FLOOR}"
        )

    log_tol = math.log(trunc.term_tol)
    budget = -log_tol
    k_cap = min(int(math.sqrt(budget / (4 * t_min))) + 20, trunc.max_index)
    m_cap = min(int((budget + 50) / (series.decay_per_m * t_min)) + 50, trunc.max_index)

    while True:
        kk, mm = np.meshgrid(np.arange(k_cap + 1), np.arange(m_cap + 1), indexing="ij")
        log_bound = series.log_bound(kk, mm) - series.eigenvalue(kk, mm) * t_min
        log_scale = float(logsumexp(log_bound))
        edge_k = _edge_tail(log_bound, axis=0)
        edge_m = _edge_tail(log_bound, axis=1)
        threshold = trunc.term_tol * math.exp(log_scale)
        if edge_k <= threshold and edge_m <= threshold:
            break
        grow_k = edge_k > threshold and k_cap < trunc.max_index
        grow_m = edge_m > threshold and m_cap < trunc.max_index
        if not (grow_k or grow_m):
            raise SeriesDivergenceGuard(
                details=(
                    f"{series.name}: cota de frontera {max(edge_k, edge_m):.3e} > {threshold:.3e} "
                    f"en max_index={trunc.max_index} (t={t_min})"
                )
            )
        if grow_k:
            k_cap = min(2 * k_cap, trunc.max_index)
        if grow_m:
            m_cap = min(2 * m_cap, trunc.max_index)

    keep = log_bound >= log_tol + log_scale
    dropped = log_bound[~keep]
    tail = (math.exp(float(logsumexp(dropped))) if dropped.size else 0.0) + edge_k + edge_m

    k, m = kk[keep], mm[keep]
    order = np.lexsort((k, k + m))
    k, m = k[order], m[order]
    table = ModeTable(
        k=k,
        m=m,
        coeff=np.exp(series.log_coeff(k, m)),
        eigenvalue=series.eigenvalue(k, m).astype(float),
        tail_bound=tail,
        t_min=t_min,
        scale=math.exp(log_scale),
    )
    logger.debug(
        "series_truncated",
        family=series.name,
        n=series.n,
        t_min=t_min,
        modes=len(table),
        k_cap=k_cap,
        m_cap=m_cap,
        tail_bound=tail,
    )
    return table


def _edge_tail(log_bound: NDArray[np.float64], axis: int) -> float:
    """Cola geométrica más allá del último índice de `axis`, con la razón de las dos últimas filas."""
    last = np.take(log_bound, -1, axis=axis)
    log_ratio = last - np.take(log_bound, -2, axis=axis)
    if np.any(log_ratio >= 0):
        return math.inf
    return math.exp(float(logsumexp(last + log_ratio - np.log(-np.expm1(log_ratio)))))


# ── Motor común ───────────────────────────────────────────────────────────────


class SpectralSeries(ABC):
    """Serie doble truncada para todos los t ≥ t_min."""

    name: str = "series"
    decay_per_m: float  # λ_{0,m} ≥ decay_per_m · m

    def __init__(self, params: ModelParams, t_min: float, trunc: Truncation | None = None) -> None:
        self.params = params
        self.n = params.n
        self.trunc = trunc or settings.default_truncation()
        self.alpha = 2.0 * params.n - 1
        self.decay_per_m = self._decay_per_m()
        self.table = select_modes(self, t_min, self.trunc)
        self._groups = [(int(m), np.flatnonzero(self.table.m == m)) for m in np.unique(self.table.m)]

    @classmethod
    def cached(cls, params: ModelParams, t_min: float, trunc: Truncation | None = None) -> Self:
        return _cached_series(cls, params, float(t_min), trunc or settings.default_truncation())

    # Piezas de cada familia

    @abstractmethod
    def _decay_per_m(self) -> float: ...

    @abstractmethod
    def log_coeff(self, k: NDArray, m: NDArray) -> NDArray[np.float64]: ...

    @abstractmethod
    def eigenvalue(self, k: NDArray, m: NDArray) -> NDArray[np.float64]: ...

    @abstractmethod
    def jacobi_beta(self, m: ArrayLike) -> NDArray[np.float64]: ...

    @abstractmethod
    def log_fiber_sup(self, m: NDArray) -> NDArray[np.float64]: ...

    @abstractmethod
    def fiber_factor(self, m: int, fiber: NDArray[np.float64]) -> NDArray[np.float64]: ...

    @abstractmethod
    def radial_power(self, m: int) -> int: ...

    # Piezas exactas para la suma en precisión extendida

    @abstractmethod
    def coeff_integer(self, k: int, m: int) -> int: ...

    @abstractmethod
    def coeff_constant_precise(self) -> mpmath.mpf: ...

    @abstractmethod
    def fiber_factors_precise(self, m_max: int, fiber: mpmath.mpf) -> list[mpmath.mpf]: ...

    # Algoritmo

    def log_bound(self, k: NDArray, m: NDArray) -> NDArray[np.float64]:
        top = np.maximum(self.alpha, self.jacobi_beta(m))
        return self.log_coeff(k, m) + self.log_fiber_sup(m) + log_binom(k + top, k)

    def evaluate(
        self,
        r: ArrayLike,
        fiber: ArrayLike,
        times: ArrayLike,
        fiber_factor: FiberFactor | None = None,
    ) -> NDArray[np.float64]:
        """Valores en los puntos (r_i, fibra_i) para cada tiempo: array (len(times), len(puntos))."""
        r_arr, fiber_arr = np.broadcast_arrays(
            np.atleast_1d(np.asarray(r, dtype=float)), np.atleast_1d(np.asarray(fiber, dtype=float))
        )
        times_arr = np.atleast_1d(np.asarray(times, dtype=float))
        if times_arr.min() < self.table.t_min * (1 - 1e-12):
            raise SeriesDivergenceGuard(
                details=f"{self.name}: t={times_arr.min()} < t_min={self.table.t_min} de la tabla de modos"
            )
        factor = fiber_factor or self.fiber_factor
        x = np.cos(2 * r_arr)
        cos_r = np.cos(r_arr)
        out = np.zeros((times_arr.size, r_arr.size))
        for m, idx in self._groups:
            ks = self.table.k[idx]
            jac = jacobi_p_all(int(ks.max()), self.alpha, float(self.jacobi_beta(m)), x)[ks]
            weights = self.table.coeff[idx][None, :] * np.exp(-np.outer(times_arr, self.table.eigenvalue[idx]))
            angular = factor(m, fiber_arr) * cos_r ** self.radial_power(m)
            out += (weights @ jac) * angular[None, :]
        return out

    def error_bound(self) -> float:
        """Cola de truncado más redondeo acumulado de la suma."""
        return self.table.tail_bound + len(self.table) * np.finfo(float).eps * self.table.scale

    def evaluate_precise(self, r: float, fiber: float, t: float, dps: int) -> float:
        """Suma de la tabla en un punto con `dps` dígitos decimales y coeficientes exactos."""
        with mpmath.workdps(dps):
            x = mpmath.cos(2 * mpmath.mpf(r))
            cos_r = mpmath.cos(mpmath.mpf(r))
            time = mpmath.mpf(t)
            fibers = self.fiber_factors_precise(int(self.table.m.max()), mpmath.mpf(fiber))
            total = mpmath.mpf(0)
            for m, idx in self._groups:
                ks = [int(k) for k in self.table.k[idx]]
                jac = jacobi_p_all_precise(max(ks), int(self.alpha), int(self.jacobi_beta(m)), x)
                radial = mpmath.fsum(
                    self.coeff_integer(k, m) * mpmath.exp(-int(self.eigenvalue(k, m)) * time) * jac[k] for k in ks
                )
                total += radial * fibers[m] * cos_r ** self.radial_power(m)
            return float(total * self.coeff_constant_precise())

    def refine(self, r: float, fiber: float, t: float, rel_tol: float) -> tuple[float, float, dict[str, Any]]:
        """
        Reevaluación en un punto cuando el redondeo en doble precisión supera
        rel_tol·|valor|.

        La tolerancia de término se fija frente al menor valor que puede tomar
        el núcleo, del orden de e^{−π²/4t}·t^{2n+4} (el diámetro es π), y la
        suma se hace con los dígitos que esa tolerancia exige.
        """
        log_floor = math.pi**2 / (4 * t) + (2 * self.n + 4) * abs(math.log(t)) + 10
        term_tol = rel_tol * math.exp(-log_floor) * 1e-2
        budget = -math.log(term_tol)
        trunc = Truncation(
            max_index=max(self.trunc.max_index, int(2 * budget / (self.decay_per_m * t)) + 100),
            term_tol=term_tol,
        )
        fine = type(self).cached(self.params, t, trunc)
        dps = math.ceil(-math.log10(term_tol)) + 15
        value = fine.evaluate_precise(r, fiber, t, dps)
        error = fine.table.tail_bound + 10.0 ** (-(dps - 10)) * fine.table.scale * len(fine.table)
        if error > rel_tol * abs(value):
            logger.warning(
                "series_precision_exhausted",
                family=self.name,
                n=self.n,
                t=t,
                value=value,
                error=error,
                precision_digits=dps,
            )
        logger.debug("series_refined", family=self.name, n=self.n, t=t, modes=len(fine.table), precision_digits=dps)
        return value, error, {"terms_used": fine.terms_used, "tail_bound": fine.table.tail_bound, "precision_digits": dps}

    @property
    def terms_used(self) -> int:
        return len(self.table)


@lru_cache(maxsize=64)
def _cached_series(cls: type[SpectralSeries], params: ModelParams, t_min: float, trunc: Truncation) -> SpectralSeries:
    return cls(params, t_min, trunc)


# ── Familias ──────────────────────────────────────────────────────────────────


class SphereSeries(SpectralSeries):
    """p_t(r, η) en S^{4n+3}: β = m+1, F_m = sin((m+1)η)/sin η, λ = 4[k(k+2n+m+1)+nm]."""

    name = "sphere"

    def _decay_per_m(self) -> float:
        return 4.0 * self.n

    def log_coeff(self, k, m):
        n = self.n
        return (
            gammaln(2 * n)
            - math.log(2)
            - (2 * n + 2) * math.log(math.pi)
            + np.log(2 * k + m + 2 * n + 1)
            + np.log(m + 1)
            + log_binom(k + m + 2 * n, 2 * n - 1)
        )

    def eigenvalue(self, k, m):
        n = self.n
        return 4.0 * (k * (k + 2 * n + m + 1) + n * m)

    def jacobi_beta(self, m):
        return np.asarray(m, dtype=float) + 1

    def log_fiber_sup(self, m):
        return np.log(np.asarray(m, dtype=float) + 1)

    def fiber_factor(self, m, fiber):
        return np.asarray(vertical_character(m, fiber), dtype=float)

    def radial_power(self, m):
        return m

    def coeff_integer(self, k, m):
        n = self.n
        return (2 * k + m + 2 * n + 1) * (m + 1) * math.comb(k + m + 2 * n, 2 * n - 1)

    def coeff_constant_precise(self):
        return math.factorial(2 * self.n - 1) / (2 * mpmath.pi ** (2 * self.n + 2))

    def fiber_factors_precise(self, m_max, fiber):
        # U_m(cos η) = sin((m+1)η)/sin η
        c = mpmath.cos(fiber)
        out = [mpmath.mpf(1), 2 * c]
        for _ in range(2, m_max + 1):
            out.append(2 * c * out[-1] - out[-2])
        return out[: m_max + 1]


class CRSeries(SpectralSeries):
    """
    p_t^{CR}(r, θ) en S^{4n+1}: los términos ±m se agrupan en 2cos(mθ);
    β = |m|, λ = 4k(k+|m|+2n) + 4|m|n.
    """

    name = "cr"

    def _decay_per_m(self) -> float:
        return 4.0 * self.n

    def log_coeff(self, k, m):
        n = self.n
        m = np.asarray(m)
        return (
            gammaln(2 * n)
            - math.log(2)
            - (2 * n + 1) * math.log(math.pi)
            + np.log(2 * k + m + 2 * n)
            + log_binom(k + m + 2 * n - 1, 2 * n - 1)
            + np.where(m > 0, math.log(2), 0.0)
        )

    def eigenvalue(self, k, m):
        n = self.n
        return 4.0 * k * (k + m + 2 * n) + 4.0 * m * n

    def jacobi_beta(self, m):
        return np.asarray(m, dtype=float)

    def log_fiber_sup(self, m):
        # cubre también la derivada en θ, de módulo ≤ m
        return np.log(np.maximum(np.asarray(m, dtype=float), 1.0))

    def fiber_factor(self, m, fiber):
        return np.cos(m * fiber)

    @staticmethod
    def theta_derivative_factor(m: int, fiber: NDArray[np.float64]) -> NDArray[np.float64]:
        return -m * np.sin(m * fiber)

    def radial_power(self, m):
        return m

    def coeff_integer(self, k, m):
        n = self.n
        return (2 * k + m + 2 * n) * math.comb(k + m + 2 * n - 1, 2 * n - 1) * (2 if m > 0 else 1)

    def coeff_constant_precise(self):
        return math.factorial(2 * self.n - 1) / (2 * mpmath.pi ** (2 * self.n + 1))

    def fiber_factors_precise(self, m_max, fiber):
        # cos(mθ) = T_m(cos θ)
        c = mpmath.cos(fiber)
        out = [mpmath.mpf(1), c]
        for _ in range(2, m_max + 1):
            out.append(2 * c * out[-1] - out[-2])
        return out[: m_max + 1]


class CPSeries(SpectralSeries):
    """h_t(r, φ) en CP^{2n+1}: β = 2m+1, F_m = P_m^{0,0}(cos 2φ), (cos r)^{2m}, λ = 4k(k+2n+2m+1) + 8nm."""

    name = "cp"

    def _decay_per_m(self) -> float:
        return 8.0 * self.n

    def log_coeff(self, k, m):
        n = self.n
        return (
            gammaln(2 * n)
            - math.log(4)
            - (2 * n + 2) * math.log(math.pi)
            + np.log(2 * k + 2 * m + 2 * n + 1)
            + np.log(2 * m + 1)
            + log_binom(k + 2 * m + 2 * n, 2 * n - 1)
        )

    def eigenvalue(self, k, m):
        n = self.n
        return 4.0 * k * (k + 2 * n + 2 * m + 1) + 8.0 * n * m

    def jacobi_beta(self, m):
        return 2 * np.asarray(m, dtype=float) + 1

    def log_fiber_sup(self, m):
        return np.zeros_like(np.asarray(m, dtype=float))

    def fiber_factor(self, m, fiber):
        return eval_legendre(m, np.cos(2 * fiber))

    def radial_power(self, m):
        return 2 * m

    def coeff_integer(self, k, m):
        n = self.n
        return (2 * k + 2 * m + 2 * n + 1) * (2 * m + 1) * math.comb(k + 2 * m + 2 * n, 2 * n - 1)

    def coeff_constant_precise(self):
        return math.factorial(2 * self.n - 1) / (4 * mpmath.pi ** (2 * self.n + 2))

    def fiber_factors_precise(self, m_max, fiber):
        x = mpmath.cos(2 * fiber)
        out = [mpmath.mpf(1), x]
        for j in range(1, m_max):
            out.append(((2 * j + 1) * x * out[-1] - j * out[-2]) / (j + 1))
        return out[: m_max + 1]
