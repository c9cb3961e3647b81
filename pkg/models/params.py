"""
Modelos Pydantic de entrada: índices polinómicos, puntos, políticas numéricas y RunConfig.
Sin `from typing import` salvo Literal/Self — tipos nativos Python 3.12.

Todos son inmutables (frozen): se comparten entre hilos sin copia.
Una violación de invariante lanza pydantic.ValidationError; el CLI la
traduce a ConfigError (código de salida 2).
"""

import math
from pathlib import Path
from typing import Literal

from typing_extensions import Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

HALF_PI = math.pi / 2


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


# ── Fibración ─────────────────────────────────────────────────────────────────


class ModelParams(_Frozen):
    """Índice n de la fibración S^{4n+3} → HP^n."""

    n: int = Field(ge=1, description="esfera de dimensión 4n+3")

    @property
    def sphere_dim(self) -> int:
        return 4 * self.n + 3


# ── Índices de polinomios ─────────────────────────────────────────────────────


class JacobiIndex(_Frozen):
    k: int = Field(ge=0)
    alpha: float = Field(gt=-1)
    beta: float = Field(gt=-1)


class GegenbauerIndex(_Frozen):
    m: int = Field(ge=0)
    lam: float = Field(gt=0, description="parámetro λ de C_m^λ")


# ── Puntos en coordenadas cilíndricas ─────────────────────────────────────────


class CylPoint(_Frozen):
    """Punto (r, η) de S^{4n+3}: r distancia en HP^n, η distancia en SU(2)."""

    r: float = Field(ge=0, lt=HALF_PI)
    eta: float = Field(ge=0, le=math.pi)


class CPPoint(_Frozen):
    """
    Punto (r, φ) de CP^{2n+1}. Se acepta φ ∈ [0, π] pero el núcleo sólo
    depende de cos 2φ; `canonical_phi` lo lleva a [0, π/2].
    """

    r: float = Field(ge=0, lt=HALF_PI)
    phi: float = Field(ge=0, le=math.pi)

    @property
    def canonical_phi(self) -> float:
        return math.pi - self.phi if self.phi > HALF_PI else self.phi

    @property
    def outside_geometric_range(self) -> bool:
        return self.phi > HALF_PI


# ── Políticas numéricas ───────────────────────────────────────────────────────


class Truncation(_Frozen):
    """Política de corte de series. La cota de cola alcanzada se informa en KernelEval."""

    max_index: int = Field(default=4000, ge=1)
    term_tol: float = Field(default=1e-14, gt=0)


class QuadratureSpec(_Frozen):
    rel_tol: float = Field(default=1e-9, gt=0)
    abs_tol: float = Field(default=1e-12, gt=0)
    max_depth: int = Field(default=60, ge=1)
    tail_cutoff_sigma: float = Field(default=8.0, ge=6)
    max_panels: int = Field(default=20000, ge=1)

    def tightened(self, factor: float = 1e-3, abs_tol: float | None = None) -> "QuadratureSpec":
        """Copia con rel_tol reducida y abs_tol opcionalmente sustituida."""
        return self.model_copy(
            update={
                "rel_tol": self.rel_tol * factor,
                "abs_tol": self.abs_tol if abs_tol is None else abs_tol,
            }
        )


# ── CLI ───────────────────────────────────────────────────────────────────────

Command = Literal["kernel-sphere", "kernel-cp", "green", "distance", "asymptotics", "validate"]
Method = Literal["spectral", "integral", "intertwined", "auto"]
Regime = Literal["diagonal", "vertical", "horizontal", "general", "cp-diagonal", "cp-vertical"]
Suite = Literal[
    "all",
    "orthopoly",
    "quadrature",
    "cross-rep",
    "normalization",
    "heat-residual",
    "intertwining",
    "green",
    "cp-routes",
    "asymptotics",
    "distance",
    "pde",
]

_METHODS_BY_COMMAND: dict[str, frozenset[str]] = {
    "kernel-sphere": frozenset({"spectral", "integral", "auto"}),
    "kernel-cp": frozenset({"spectral", "integral", "intertwined", "auto"}),
}


class GridAxis(_Frozen):
    """Eje `lo:hi:count` con nodos equiespaciados (extremos incluidos)."""

    lo: float
    hi: float
    count: int = Field(default=1, ge=1)

    @classmethod
    def parse(cls, text: str) -> "GridAxis":
        parts = text.split(":")
        if len(parts) == 1:
            value = float(parts[0])
            return cls(lo=value, hi=value, count=1)
        if len(parts) != 3:
            raise ValueError(f"eje inválido {text!r}: se espera 'a:b:N' o un valor")
        return cls(lo=float(parts[0]), hi=float(parts[1]), count=int(parts[2]))

    @model_validator(mode="after")
    def _ordered(self) -> Self:
        if self.hi < self.lo:
            raise ValueError("hi < lo")
        return self

    def nodes(self) -> list[float]:
        if self.count == 1:
            return [self.lo]
        step = (self.hi - self.lo) / (self.count - 1)
        return [self.lo + i * step for i in range(self.count)]


class RunConfig(_Frozen):
    command: Command
    n: int = Field(default=1, ge=1)
    t: tuple[float, ...] = (0.5,)
    r: GridAxis = GridAxis(lo=0.0, hi=0.0)
    eta: GridAxis = GridAxis(lo=0.0, hi=0.0)
    phi: GridAxis = GridAxis(lo=0.0, hi=0.0)
    method: Method = "auto"
    regime: Regime = "diagonal"
    suite: Suite = "all"
    rel_tol: float | None = Field(default=None, gt=0)
    abs_tol: float | None = Field(default=None, gt=0)
    out: Path | None = None

    @model_validator(mode="after")
    def _consistent(self) -> Self:
        if any(t <= 0 for t in self.t):
            raise ValueError("todos los tiempos deben ser > 0")
        allowed = _METHODS_BY_COMMAND.get(self.command)
        if allowed is not None and self.method not in allowed:
            raise ValueError(f"método {self.method!r} no válido para {self.command}")
        return self

    @property
    def params(self) -> ModelParams:
        return ModelParams(n=self.n)
