"""
tests/conftest.py — Variables de entorno mínimas para todos los tests.

Se ejecuta antes de cualquier módulo de test, garantizando que
`Settings()` se construya con valores deterministas aunque exista un .env local.
"""

import os

import pytest

os.environ.setdefault("LOG_LEVEL", "WARNING")
os.environ.setdefault("LOG_FORMAT", "json")
os.environ.setdefault("HOPFHEAT_WORKERS", "1")

# structlog filtrado por LOG_LEVEL también en los tests de servicios
import middleware.logging  # noqa: E402,F401
from models.params import ModelParams  # noqa: E402


@pytest.fixture
def params1() -> ModelParams:
    return ModelParams(n=1)


@pytest.fixture
def params2() -> ModelParams:
    return ModelParams(n=2)
