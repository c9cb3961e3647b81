"""
main.py — Punto de entrada del CLI de hopf-heat.

Evalúa los núcleos, la función de Green, la distancia y las asintóticas sobre
rejillas y escribe CSV; `validate` ejecuta las suites de validación cruzada.

Uso:
    python main.py kernel-sphere --n 1 --t 0.5 --r 0:1.2:5 --eta 0:3.0:5 --method auto
    python main.py kernel-cp --n 1 --t 0.2,0.5 --r 0:0.9:4 --phi 0:1.5:4 --out h.csv
    python main.py distance --r 0 --eta 3.14159
    python main.py validate --suite cross-rep --n 1

Códigos de salida: 0 éxito, 1 fallo de validación o error numérico,
2 error de configuración o de dominio.
"""

import argparse
import csv
import itertools
import sys
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TextIO

import structlog

from config import settings
from middleware.error_handler import ConfigError, handle_app_error
from middleware.logging import bound_command
from models.params import CPPoint, CylPoint, GridAxis, QuadratureSpec, RunConfig
from models.responses import KernelRow, SuiteReport
from services import asymptotics, cp_kernel, green, sphere_kernel
from services.validation import run_suite

logger = structlog.get_logger(__name__)

Row = tuple[object, ...]


# ── Argumentos ────────────────────────────────────────────────────────────────


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hopf-heat",
        description="Núcleos del calor subelípticos de la fibración de Hopf cuaterniónica",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def common(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--n", type=int, default=1, help="S^{4n+3} → HP^n")
        sub.add_argument("--out", default=None, help="ruta del CSV (por defecto stdout)")
        sub.add_argument("--rel-tol", type=float, default=None)
        sub.add_argument("--abs-tol", type=float, default=None)
        return sub

    def grid(sub: argparse.ArgumentParser, *, fiber: str, times: bool = True) -> None:
        if times:
            sub.add_argument("--t", default="0.5", help="tiempo o lista separada por comas")
        sub.add_argument("--r", default="0", help="valor o a:b:N")
        sub.add_argument(f"--{fiber}", default="0", help="valor o a:b:N")

    sub = common("kernel-sphere", "p_t(r, η) en S^{4n+3}")
    grid(sub, fiber="eta")
    sub.add_argument("--method", choices=["spectral", "integral", "auto"], default="auto")

    sub = common("kernel-cp", "h_t(r, φ) en CP^{2n+1}")
    grid(sub, fiber="phi")
    sub.add_argument("--method", choices=["spectral", "integral", "intertwined", "auto"], default="auto")

    grid(common("green", "función de Green de −L + 4n(n+1)"), fiber="eta", times=False)
    grid(common("distance", "distancia subriemanniana d(r, η)"), fiber="eta", times=False)

    sub = common("asymptotics", "asintóticas de tiempo corto")
    grid(sub, fiber="eta")
    sub.add_argument("--phi", default="0", help="valor o a:b:N (regímenes cp-*)")
    sub.add_argument(
        "--regime",
        choices=["diagonal", "vertical", "horizontal", "general", "cp-diagonal", "cp-vertical"],
        default="diagonal",
    )

    sub = common("validate", "suites de validación cruzada")
    sub.add_argument(
        "--suite",
        default="all",
        choices=[
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
        ],
    )
    return parser


def parse_config(argv: Sequence[str] | None = None) -> RunConfig:
    """argv → RunConfig validada; los ejes mal formados se traducen a ConfigError."""
    args = build_parser().parse_args(argv)
    fields: dict[str, object] = {"command": args.command, "n": args.n}
    try:
        if hasattr(args, "t"):
            fields["t"] = tuple(float(v) for v in args.t.split(","))
        for axis in ("r", "eta", "phi"):
            if getattr(args, axis, None) is not None:
                fields[axis] = GridAxis.parse(getattr(args, axis))
    except ValueError as exc:
        raise ConfigError(details=str(exc)) from exc
    for key in ("method", "regime", "suite"):
        if getattr(args, key, None) is not None:
            fields[key] = getattr(args, key)
    fields["rel_tol"] = args.rel_tol
    fields["abs_tol"] = args.abs_tol
    fields["out"] = args.out
    return RunConfig(**fields)


def _quadrature(config: RunConfig) -> QuadratureSpec:
    spec = settings.default_quadrature()
    update = {k: v for k, v in (("rel_tol", config.rel_tol), ("abs_tol", config.abs_tol)) if v is not None}
    return spec.model_copy(update=update) if update else spec


# ── Filas por comando ─────────────────────────────────────────────────────────


def _kernel_row(row: KernelRow) -> Row:
    return (row.r, row.fiber, row.t, row.value, row.error_estimate, row.method, row.terms_or_evals)


def _kernel_sphere(config: RunConfig, spec: QuadratureSpec) -> tuple[list[str], list[Callable[[], Row]]]:
    params = config.params

    def job(t: float, r: float, eta: float) -> Row:
        result = sphere_kernel.evaluate_sphere(params, t, CylPoint(r=r, eta=eta), config.method, spec)
        return _kernel_row(
            KernelRow(
                r=r,
                fiber=eta,
                t=t,
                value=result.value,
                error_estimate=result.error_estimate,
                method=result.method,
                terms_or_evals=result.terms_or_evals,
            )
        )

    grid = itertools.product(config.t, config.r.nodes(), config.eta.nodes())
    header = ["r", "eta", "t", "value", "error_estimate", "method", "terms_or_evals"]
    return header, [lambda p=p: job(*p) for p in grid]


def _kernel_cp(config: RunConfig, spec: QuadratureSpec) -> tuple[list[str], list[Callable[[], Row]]]:
    params = config.params

    def job(t: float, r: float, phi: float) -> Row:
        result = cp_kernel.evaluate_cp(params, t, CPPoint(r=r, phi=phi), config.method, spec)
        return _kernel_row(
            KernelRow(
                r=r,
                fiber=phi,
                t=t,
                value=result.value,
                error_estimate=result.error_estimate,
                method=result.method,
                terms_or_evals=result.terms_or_evals,
            )
        )

    grid = itertools.product(config.t, config.r.nodes(), config.phi.nodes())
    header = ["r", "phi", "t", "value", "error_estimate", "method", "terms_or_evals"]
    return header, [lambda p=p: job(*p) for p in grid]


def _green(config: RunConfig, spec: QuadratureSpec) -> tuple[list[str], list[Callable[[], Row]]]:
    params = config.params

    def job(r: float, eta: float) -> Row:
        return (r, eta, green.green_sphere(params, CylPoint(r=r, eta=eta)))

    grid = itertools.product(config.r.nodes(), config.eta.nodes())
    return ["r", "eta", "value"], [lambda p=p: job(*p) for p in grid]


def _distance(config: RunConfig, spec: QuadratureSpec) -> tuple[list[str], list[Callable[[], Row]]]:
    def job(r: float, eta: float) -> Row:
        return (r, eta, asymptotics.subriemannian_distance(r, eta))

    grid = itertools.product(config.r.nodes(), config.eta.nodes())
    return ["r", "eta", "value"], [lambda p=p: job(*p) for p in grid]


_REGIMES: dict[str, Callable[..., float]] = {
    "diagonal": lambda params, t, r, fiber: asymptotics.p_asym_diagonal(params, t),
    "vertical": lambda params, t, r, fiber: asymptotics.p_asym_vertical(params, t, fiber),
    "horizontal": lambda params, t, r, fiber: asymptotics.p_asym_horizontal(params, t, r),
    "general": lambda params, t, r, fiber: asymptotics.p_asym_general(params, t, r, fiber),
    "cp-diagonal": lambda params, t, r, fiber: asymptotics.h_asym_diagonal(params, t),
    "cp-vertical": lambda params, t, r, fiber: asymptotics.h_asym_vertical(params, t, fiber),
}


def _asymptotics(config: RunConfig, spec: QuadratureSpec) -> tuple[list[str], list[Callable[[], Row]]]:
    params = config.params
    formula = _REGIMES[config.regime]
    fiber_axis = config.phi if config.regime.startswith("cp-") else config.eta

    def job(t: float, r: float, fiber: float) -> Row:
        return (config.regime, r, fiber, t, formula(params, t, r, fiber))

    grid = itertools.product(config.t, config.r.nodes(), fiber_axis.nodes())
    return ["regime", "r", "fiber", "t", "value"], [lambda p=p: job(*p) for p in grid]


_COMMANDS = {
    "kernel-sphere": _kernel_sphere,
    "kernel-cp": _kernel_cp,
    "green": _green,
    "distance": _distance,
    "asymptotics": _asymptotics,
}


# ── Salida ────────────────────────────────────────────────────────────────────


def _format(value: object) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def write_csv(header: list[str], rows: list[Row], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format(v) for v in row])


def print_report(report: SuiteReport, stream: TextIO) -> None:
    """Tabla `suite | check | measured | tolerance | status`."""
    print("suite | check | measured | tolerance | status", file=stream)
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        line = f"{c.suite} | {c.check} | {c.measured:.3e} | {c.tolerance:.1e} | {status}"
        if c.details and not c.passed:
            line += f" ({c.details})"
        print(line, file=stream)
    print(f"{len(report.checks) - len(report.failures)}/{len(report.checks)} comprobaciones superadas", file=stream)


def _emit(config: RunConfig, write: Callable[[TextIO], None]) -> None:
    if config.out is None:
        write(sys.stdout)
        return
    with open(config.out, "w", encoding="utf-8", newline="") as fh:
        write(fh)


# ── Ejecución ─────────────────────────────────────────────────────────────────


def run(config: RunConfig) -> int:
    """Ejecuta un comando y devuelve el código de salida."""
    with bound_command(config.command, n=config.n):
        if config.command == "validate":
            report = run_suite(config.suite, config.params)
            _emit(config, lambda fh: print_report(report, fh))
            for failure in report.failures:
                logger.warning(
                    "check_failed",
                    suite=failure.suite,
                    check=failure.check,
                    measured=failure.measured,
                    tolerance=failure.tolerance,
                )
            return 0 if report.passed else 1

        header, jobs = _COMMANDS[config.command](config, _quadrature(config))
        # el orden de map conserva el de la rejilla
        with ThreadPoolExecutor(max_workers=max(settings.HOPFHEAT_WORKERS, 1)) as pool:
            rows = list(pool.map(lambda job: job(), jobs))
        _emit(config, lambda fh: write_csv(header, rows, fh))
        logger.info("rows_written", rows=len(rows), out=str(config.out) if config.out else "stdout")
        return 0


def main(argv: Sequence[str] | None = None) -> int:
    try:
        return run(parse_config(argv))
    except Exception as exc:
        return handle_app_error(exc)


if __name__ == "__main__":
    sys.exit(main())
