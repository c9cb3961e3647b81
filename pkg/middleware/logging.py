"""
middleware/logging.py — Logging estructurado del CLI y de los servicios numéricos.

Configura structlog al importar el módulo (idempotente). La salida va a
stderr en JSON (o en formato consola con LOG_FORMAT=console) para que stdout
quede libre para el CSV y la tabla de validación.

Uso:
    from middleware.logging import bound_command
    import structlog

    logger = structlog.get_logger(__name__)
    with bound_command("kernel-sphere", n=1):
        logger.info("rows_written", rows=25)
"""

import logging
import sys
import time
from collections.abc import Iterator
from contextlib import contextmanager

import structlog

from config import settings

# ── Configuración de structlog ────────────────────────────────────────────────


def configure_structlog() -> None:
    """Configura structlog sobre el logging estándar. Llamar una sola vez al iniciar."""
    log_level = getattr(logging, settings.LOG_LEVEL.upper(), logging.WARNING)
    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=log_level,
    )

    renderer = (
        structlog.dev.ConsoleRenderer(colors=False)
        if settings.console_logs
        else structlog.processors.JSONRenderer()
    )
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_log_level,
            structlog.stdlib.add_logger_name,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            renderer,
        ],
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )


configure_structlog()

logger = structlog.get_logger(__name__)


# ── Contexto por comando ──────────────────────────────────────────────────────


@contextmanager
def bound_command(command: str, **context: object) -> Iterator[None]:
    """Liga `command` y el contexto dado a todos los logs emitidos dentro del bloque."""
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(command=command, **context)
    start = time.perf_counter()
    try:
        yield
    except Exception:
        logger.exception("command_failed")
        raise
    finally:
        duration_ms = round((time.perf_counter() - start) * 1000, 1)
        logger.info("command_finished", duration_ms=duration_ms)
        structlog.contextvars.clear_contextvars()
