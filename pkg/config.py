from pydantic_settings import BaseSettings, SettingsConfigDict

from models.params import QuadratureSpec, Truncation


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # ── Cuadratura ────────────────────────────────────────────
    HOPFHEAT_QUAD_RELTOL: float = 1e-9
    HOPFHEAT_QUAD_ABSTOL: float = 1e-12
    HOPFHEAT_QUAD_MAX_DEPTH: int = 60
    HOPFHEAT_QUAD_MAX_PANELS: int = 20000
    HOPFHEAT_TAIL_SIGMA: float = 8.0

    # ── Series espectrales ────────────────────────────────────
    HOPFHEAT_SERIES_MAX_INDEX: int = 4000
    HOPFHEAT_SERIES_TERM_TOL: float = 1e-14
    HOPFHEAT_SERIES_REL_TOL: float = 1e-10  # por encima, reevaluación en precisión extendida

    # ── Umbrales de tiempo ────────────────────────────────────
    HOPFHEAT_SPECTRAL_T_FLOOR: float = 0.01
    HOPFHEAT_INTEGRAL_T_FLOOR: float = 0.005

    # ── Singularidades ────────────────────────────────────────
    HOPFHEAT_POLE_EPS: float = 1e-14
    HOPFHEAT_SINGULAR_EPS: float = 1e-8

    # ── CLI ───────────────────────────────────────────────────
    HOPFHEAT_WORKERS: int = 1

    # ── Logging ───────────────────────────────────────────────
    LOG_LEVEL: str = "WARNING"
    LOG_FORMAT: str = "json"  # json | console

    # ── Propiedades derivadas ─────────────────────────────────
    def default_quadrature(self) -> QuadratureSpec:
        """QuadratureSpec construida con las tolerancias del entorno."""
        return QuadratureSpec(
            rel_tol=self.HOPFHEAT_QUAD_RELTOL,
            abs_tol=self.HOPFHEAT_QUAD_ABSTOL,
            max_depth=self.HOPFHEAT_QUAD_MAX_DEPTH,
            tail_cutoff_sigma=self.HOPFHEAT_TAIL_SIGMA,
            max_panels=self.HOPFHEAT_QUAD_MAX_PANELS,
        )

    def default_truncation(self) -> Truncation:
        return Truncation(
            max_index=self.HOPFHEAT_SERIES_MAX_INDEX,
            term_tol=self.HOPFHEAT_SERIES_TERM_TOL,
        )

    @property
    def console_logs(self) -> bool:
        return self.LOG_FORMAT.lower() == "console"


# Instancia singleton; importar desde cualquier módulo con:
#   from config import settings
settings = Settings()
