"""
Entidades de resultado — representación en memoria (dataclasses).
Usadas como DTOs entre servicios y el CLI.
"""

from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np

Which = Literal["sphere", "cp"]


# ── Cuadratura ────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class QuadResult:
    value: float
    error_estimate: float  # ≥ 0, suma de |K15 − G7| de los paneles aceptados
    evaluations: int
    abs_integral: float = 0.0  # ∫|f|, escala del redondeo por cancelación


# ── Núcleos ───────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class KernelEval:
    """Valor de un núcleo con su cota de error y diagnósticos de la ruta usada."""

    value: float
    error_estimate: float
    method: str  # spectral | integral | intertwined | closed-form
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def terms_or_evals(self) -> int:
        return int(self.diagnostics.get("terms_used", self.diagnostics.get("quad_evaluations", 0)))


@dataclass(frozen=True)
class ModeTable:
    """
    Modos (k, m) retenidos de una serie doble Σ c_{k,m} e^{-λ_{k,m} t} Φ_{k,m}.
    La cota de cola es absoluta y válida para todo t ≥ t_min.
    """

    k: np.ndarray
    m: np.ndarray
    coeff: np.ndarray
    eigenvalue: np.ndarray
    tail_bound: float
    t_min: float
    scale: float  # Σ de cotas de los modos: escala de magnitud de la serie en t_min

    def __len__(self) -> int:
        return int(self.k.size)


# ── Asintóticas ───────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class VarphiSolution:
    varphi: float  # ángulo crítico, rama negativa para η > 0
    u: float  # cos r · cos varphi, en (−1, 1)
    fpp: float  # f''(i varphi) > 0
    residual: float  # |F(varphi)|
    sin_varphi: float = 0.0
    phase: float = 0.0  # varphi + η, sin cancelación cuando varphi ≈ −π


# ── Oráculo EDP ───────────────────────────────────────────────────────────────


@dataclass
class RadialGrid:
    """Muestras de una función en una malla uniforme estrictamente interior."""

    r_nodes: np.ndarray
    fiber_nodes: np.ndarray  # η (esfera) o φ (CP)
    values: np.ndarray  # shape (len(r_nodes), len(fiber_nodes))
    which: Which = "sphere"
    time: float | None = None  # instante de la instantánea, si procede

    @property
    def h_r(self) -> float:
        return float(self.r_nodes[1] - self.r_nodes[0])

    @property
    def h_fiber(self) -> float:
        return float(self.fiber_nodes[1] - self.fiber_nodes[0])

    def with_values(self, values: np.ndarray, time: float | None = None) -> "RadialGrid":
        return RadialGrid(self.r_nodes, self.fiber_nodes, values, self.which, time)

    def window_mask(self, r_window: tuple[float, float], fiber_window: tuple[float, float]) -> np.ndarray:
        rr, ff = np.meshgrid(self.r_nodes, self.fiber_nodes, indexing="ij")
        return (
            (rr >= r_window[0]) & (rr <= r_window[1]) & (ff >= fiber_window[0]) & (ff <= fiber_window[1])
        )
