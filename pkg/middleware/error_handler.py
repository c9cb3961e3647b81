"""
middleware/error_handler.py — Errores de dominio y su traducción a código de salida.

Cada error lleva su `error_code` y su `exit_code`:
  - NonConvergence, SeriesDivergenceGuard, NoBracket, LinearSolveFailure → 1
  - DomainError, PoleSingularity, GridTooCoarse, ConfigError            → 2
  - Exception no prevista                                               → 1

El cuerpo que se escribe en stderr sigue el formato
  { error, error_code, message, details, recoverable, timestamp }
"""

from __future__ import annotations

import json
import sys
from datetime import datetime, timezone
from typing import TextIO

import structlog
from pydantic import ValidationError

logger = structlog.get_logger(__name__)


# ── Excepciones de dominio ────────────────────────────────────────────────────


class AppError(Exception):
    """Clase base para errores de dominio de hopf-heat."""

    exit_code: int = 1
    error_code: str = "INTERNAL_ERROR"
    message: str = "Error interno"
    recoverable: bool = False

    def __init__(self, message: str | None = None, details: str | None = None) -> None:
        self.message = message or self.__class__.message
        self.details = details
        super().__init__(self.message)


class NonConvergence(AppError):
    error_code = "NON_CONVERGENCE"
    message = "La cuadratura no alcanzó la tolerancia pedida"
    recoverable = True


class SeriesDivergenceGuard(AppError):
    error_code = "SERIES_DIVERGENCE"
    message = "La serie no puede truncarse con la tolerancia pedida"
    recoverable = True


class DomainError(AppError):
    exit_code = 2
    error_code = "DOMAIN_ERROR"
    message = "Argumento fuera del dominio de la fórmula"


class PoleSingularity(DomainError):
    error_code = "POLE_SINGULARITY"
    message = "La función de Green diverge en el polo"


class NoBracket(AppError):
    error_code = "NO_BRACKET"
    message = "No se encontró cambio de signo para la raíz"


class GridTooCoarse(DomainError):
    error_code = "GRID_TOO_COARSE"
    message = "Paso de malla demasiado grande"


class LinearSolveFailure(AppError):
    error_code = "LINEAR_SOLVE_FAILURE"
    message = "El sistema implícito es singular"


class ConfigError(AppError):
    exit_code = 2
    error_code = "CONFIG_ERROR"
    message = "Configuración inválida"


# ── Helpers ───────────────────────────────────────────────────────────────────


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _error_body(
    error_code: str,
    message: str,
    details: str | None = None,
    recoverable: bool = False,
) -> dict:
    return {
        "error": True,
        "error_code": error_code,
        "message": message,
        "details": details,
        "recoverable": recoverable,
        "timestamp": _now(),
    }


def as_app_error(exc: Exception) -> AppError:
    """Normaliza cualquier excepción a un AppError."""
    if isinstance(exc, AppError):
        return exc
    if isinstance(exc, ValidationError):
        details = "; ".join(
            f"{'.'.join(str(part) for part in e['loc'])}: {e['msg']}" for e in exc.errors()
        )
        return ConfigError(details=details)
    return AppError(details=f"{type(exc).__name__}: {exc}")


# ── Handler ───────────────────────────────────────────────────────────────────


def handle_app_error(exc: Exception, stream: TextIO | None = None) -> int:
    """Registra el error, escribe el cuerpo JSON en `stream` (stderr) y devuelve el código de salida."""
    err = as_app_error(exc)
    logger.error("app_error", error_code=err.error_code, details=err.details)
    body = _error_body(
        error_code=err.error_code,
        message=err.message,
        details=err.details,
        recoverable=err.recoverable,
    )
    print(json.dumps(body, ensure_ascii=False), file=stream or sys.stderr)
    return err.exit_code
