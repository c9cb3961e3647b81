"""
Modelos Pydantic de salida: filas CSV e informes de validación.
"""

from pydantic import BaseModel, Field


# ── Filas CSV ─────────────────────────────────────────────────────────────────


class KernelRow(BaseModel):
    r: float
    fiber: float  # η en la esfera, φ en CP
    t: float
    value: float
    error_estimate: float = Field(ge=0)
    method: str
    terms_or_evals: int = 0


# ── Validación ────────────────────────────────────────────────────────────────


class CheckResult(BaseModel):
    """Una comprobación con su valor medido frente a la tolerancia."""

    suite: str
    check: str
    measured: float
    tolerance: float
    passed: bool
    details: str | None = None


class SuiteReport(BaseModel):
    suite: str
    checks: list[CheckResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]
