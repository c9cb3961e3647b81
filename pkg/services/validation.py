"""
services/validation.py — Suites de validación cruzada que ejecuta `validate`.

Cada suite devuelve un SuiteReport con una CheckResult por comprobación
(valor medido, tolerancia, pasa/no pasa). `run_suite("all", ...)` las ejecuta
todas en el orden de SUITE_ORDER y concatena sus comprobaciones.

Las comprobaciones asintóticas miden el cociente oráculo/fórmula en
t ∈ {0.04, 0.02, 0.01}: la distancia a 1 debe decrecer con t y quedar dentro
de la tolerancia en t = 0.01. Los oráculos son la representación integral en
la esfera y la serie espectral refinada con mpmath en CP^{2n+1}.
"""

import math
from collections.abc import Callable

import numpy as np
import structlog
from scipy.integrate import simpson
from scipy.special import eval_gegenbauer, eval_jacobi, gammaln

from middleware.error_handler import AppError
from models.params import CPPoint, CylPoint, GegenbauerIndex, JacobiIndex, ModelParams, QuadratureSpec, Suite
from models.responses import CheckResult, SuiteReport
from services import asymptotics, cp_kernel, green, orthopoly, pde_oracle, quadrature, riemannian, sphere_kernel

logger = structlog.get_logger(__name__)

SUITE_ORDER: tuple[str, ...] = (
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
)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), np.finfo(float).tiny)


class _Collector:
    """Acumula CheckResult de una suite; una excepción de dominio cuenta como fallo."""

    def __init__(self, suite: str) -> None:
        self.suite = suite
        self.checks: list[CheckResult] = []

    def add(self, check: str, measured: float, tolerance: float, passed: bool | None = None, details: str | None = None):
        ok = bool(measured <= tolerance) if passed is None else passed
        self.checks.append(
            CheckResult(
                suite=self.suite, check=check, measured=measured, tolerance=tolerance, passed=ok, details=details
            )
        )

    def guarded(self, check: str, tolerance: float, fn: Callable[[], float], details: str | None = None) -> None:
        try:
            measured = fn()
        except AppError as exc:
            self.add(check, math.nan, tolerance, passed=False, details=f"{exc.error_code}: {exc.details or exc.message}")
            return
        self.add(check, measured, tolerance, details=details)

    def report(self) -> SuiteReport:
        return SuiteReport(suite=self.suite, checks=self.checks)


# ── Suites ────────────────────────────────────────────────────────────────────


def _suite_orthopoly(params: ModelParams) -> SuiteReport:
    out = _Collector("orthopoly")
    xs = np.linspace(-1.0, 1.0, 21)
    worst = 0.0
    for a in (0, 1, 3, 5):
        for b in (0, 1, 3, 5):
            for k in range(13):
                ours = orthopoly.jacobi_p(JacobiIndex(k=k, alpha=a, beta=b), xs)
                ref = eval_jacobi(k, a, b, xs)
                worst = max(worst, float(np.max(np.abs(ours - ref) / np.maximum(np.abs(ref), 1.0))))
    out.add("jacobi_recurrence_vs_reference", worst, 1e-10)

    lam = 2 * params.n + 1
    worst = 0.0
    for m in range(13):
        x = np.array([-0.9, 0.3, 1.0, 1.8])
        ours = orthopoly.gegenbauer_c(GegenbauerIndex(m=m, lam=lam), x)
        ref = eval_gegenbauer(m, lam, x)
        worst = max(worst, float(np.max(np.abs(ours - ref) / np.maximum(np.abs(ref), 1.0))))
    out.add("gegenbauer_recurrence_vs_reference", worst, 1e-10)

    alpha, beta = 2 * params.n - 1, 2
    spec = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-14)
    off_diag, diag = 0.0, 0.0
    for k in range(9):
        for l in range(k + 1):
            ik, il = JacobiIndex(k=k, alpha=alpha, beta=beta), JacobiIndex(k=l, alpha=alpha, beta=beta)

            def f(x, ik=ik, il=il):
                return orthopoly.jacobi_p(ik, x) * orthopoly.jacobi_p(il, x) * (1 - x) ** alpha * (1 + x) ** beta

            value = quadrature.integrate_finite(f, -1.0, 1.0, spec).value
            if k == l:
                diag = max(diag, _rel(value, orthopoly.jacobi_norm_sq(ik)))
            else:
                off_diag = max(off_diag, abs(value))
    out.add("jacobi_orthogonality_offdiag", off_diag, 1e-8)
    out.add("jacobi_norm_sq_vs_quadrature", diag, 1e-8)

    jump = max(
        abs(orthopoly.vertical_character(m, 1e-6) - orthopoly.vertical_character(m, 0.0))
        + abs(orthopoly.vertical_character(m, math.pi - 1e-6) - orthopoly.vertical_character(m, math.pi))
        for m in range(8)
    )
    out.add("vertical_character_endpoint_continuity", jump, 1e-8)
    return out.report()


def _suite_quadrature(params: ModelParams) -> SuiteReport:
    out = _Collector("quadrature")
    out.guarded("sin_0_pi", 1e-12, lambda: abs(quadrature.integrate_finite(np.sin, 0.0, math.pi).value - 2.0))
    truncated = 2.0 - math.exp(-30.0) * (900 + 60 + 2)
    out.guarded(
        "x2_exp_truncated",
        1e-9,
        lambda: _rel(quadrature.integrate_finite(lambda x: x * x * np.exp(-x), 0.0, 30.0).value, truncated),
    )
    out.guarded(
        "gaussian_tail_linear",
        1e-9,
        lambda: _rel(quadrature.integrate_gaussian_tail(lambda y: y, 0.25).value, 0.5),
    )
    out.guarded(
        "gaussian_tail_constant",
        1e-9,
        lambda: _rel(quadrature.integrate_gaussian_tail(lambda y: np.ones_like(y), 0.25).value, math.sqrt(math.pi * 0.25)),
    )

    def sinh_vs_grid() -> float:
        t = 0.1
        ours = quadrature.integrate_gaussian_tail(np.sinh, t, growth=1.0).value
        y_max = quadrature.gaussian_tail_cutoff(t, growth=1.0)
        grid = np.linspace(0.0, y_max, 1_000_001)
        return _rel(ours, float(simpson(np.sinh(grid) * np.exp(-grid * grid / (4 * t)), x=grid)))

    out.guarded("gaussian_tail_sinh_vs_simpson", 1e-9, sinh_vs_grid)

    def sigma_doubling() -> float:
        base = QuadratureSpec(tail_cutoff_sigma=8.0)
        wide = QuadratureSpec(tail_cutoff_sigma=16.0)
        a = quadrature.integrate_gaussian_tail(np.cosh, 0.3, base, growth=1.0)
        b = quadrature.integrate_gaussian_tail(np.cosh, 0.3, wide, growth=1.0)
        return abs(a.value - b.value) / max(a.error_estimate + b.error_estimate, abs(a.value) * 1e-12)

    out.guarded("tail_sigma_doubling_within_error", 1.0, sigma_doubling)
    return out.report()


def _suite_cross_rep(params: ModelParams) -> SuiteReport:
    out = _Collector("cross-rep")
    worst, where = 0.0, ""
    points = [
        (t, r, eta)
        for t in (0.1, 0.5, 1.0)
        for r in (0.0, 0.3, 0.7, 1.2)
        for eta in (0.0, 0.8, 1.6, 2.4, math.pi)
    ]
    # η = π con r = 0 a t intermedio y el régimen t < 0.1 que `auto` deja a la serie
    points += [(0.25, 0.0, math.pi), (0.05, 0.0, 1.5), (0.05, 0.7, 2.4), (0.05, 0.0, math.pi)]
    try:
        for t, r, eta in points:
            pt = CylPoint(r=r, eta=eta)
            spectral = sphere_kernel.p_t_spectral(params, t, pt).value
            integral = sphere_kernel.p_t_integral(params, t, pt).value
            dev = _rel(spectral, integral)
            if dev > worst:
                worst, where = dev, f"t={t} r={r} η={eta:.4f}"
    except AppError as exc:
        out.add("spectral_vs_integral", math.nan, 1e-6, passed=False, details=exc.details)
        return out.report()
    out.add("spectral_vs_integral", worst, 1e-6, details=where)
    return out.report()


def _sphere_mass(params: ModelParams, t: float) -> float:
    def integrand(r: float, eta: np.ndarray) -> np.ndarray:
        # la densidad en η = π/2 aísla el factor radial
        weight = sphere_kernel.cyl_measure_density(params, CylPoint(r=r, eta=math.pi / 2)) * np.sin(eta) ** 2
        return sphere_kernel.p_t_spectral_grid(params, t, np.full_like(eta, r), eta)[0] * weight

    spec = QuadratureSpec(rel_tol=1e-9, abs_tol=1e-12)
    return quadrature.integrate_nested(integrand, (0.0, math.pi / 2), (0.0, math.pi), spec).value


def _suite_normalization(params: ModelParams) -> SuiteReport:
    out = _Collector("normalization")
    for t in (0.5, 1.0):
        out.guarded(f"sphere_mass_t{t}", 1e-6, lambda t=t: abs(_sphere_mass(params, t) - 1))

        def q_mass(t=t) -> float:
            # área de la esfera unidad S^{4n+2}
            dim = 4 * params.n + 3
            area = 2 * math.exp(dim / 2 * math.log(math.pi) - gammaln(dim / 2))

            def f(delta):
                values, _, _ = riemannian.q_t_scaled(params, t, np.cos(delta))
                return values * area * np.sin(delta) ** (dim - 1)

            return abs(quadrature.integrate_finite(f, 0.0, math.pi).value - 1)

        out.guarded(f"riemannian_mass_t{t}", 1e-7, q_mass)

        def cp_mass(t=t) -> float:
            calibrated = cp_kernel.cp_normalization_constant(params, t)
            return _rel(calibrated, cp_kernel.cp_density_constant(params))

        out.guarded(f"cp_constant_vs_closed_form_t{t}", 1e-6, cp_mass)

    volume_quad = quadrature.integrate_nested(
        lambda r, eta: sphere_kernel.cyl_measure_density(params, CylPoint(r=r, eta=math.pi / 2)) * np.sin(eta) ** 2,
        (0.0, math.pi / 2),
        (0.0, math.pi),
    ).value
    out.add("volume_closed_vs_quadrature", _rel(riemannian.sphere_volume(params), volume_quad), 1e-9)

    def long_time() -> float:
        grid = [(r, eta) for r in (0.0, 0.3, 0.7, 1.2) for eta in (0.0, 0.8, 1.6, 2.4, math.pi)]
        values = [sphere_kernel.p_t_spectral(params, 10.0, CylPoint(r=r, eta=e)).value for r, e in grid]
        target = 1 / riemannian.sphere_volume(params)
        return max(_rel(v, target) for v in values)

    out.guarded("long_time_equilibrium", 1e-8, long_time)
    return out.report()


def _suite_heat_residual(params: ModelParams) -> SuiteReport:
    out = _Collector("heat-residual")
    r = np.linspace(0.2, 1.2, 6)
    for which, fiber_axis in (("sphere", np.linspace(0.5, 2.5, 6)), ("cp", np.linspace(0.3, 1.2, 6))):
        rr, ff = np.meshgrid(r, fiber_axis, indexing="ij")
        for t in (0.5, 1.0):

            def measure(t=t, which=which, rr=rr, ff=ff) -> float:
                dk_dt, lk = pde_oracle.heat_equation_terms(params, t, rr.ravel(), ff.ravel(), which)
                return float(np.max(np.abs(dk_dt - lk)) / np.max(np.abs(dk_dt)))

            out.guarded(f"{which}_t{t}", 1e-3, measure)
    return out.report()


def _suite_intertwining(params: ModelParams) -> SuiteReport:
    out = _Collector("intertwining")
    for t, r, eta in ((0.8, 0.4, 1.2), (0.8, 0.0, 0.9), (1.0, 0.6, 2.0)):
        out.guarded(
            f"t{t}_r{r}_eta{eta}",
            1e-6,
            lambda t=t, r=r, eta=eta: sphere_kernel.intertwine_check(params, t, CylPoint(r=r, eta=eta)),
        )
    return out.report()


def _suite_green(params: ModelParams) -> SuiteReport:
    out = _Collector("green")
    n = params.n
    spot = green.green_sphere(params, CylPoint(r=math.pi / 2 - 1e-9, eta=math.pi / 2))
    expected = math.gamma(n) * math.gamma(n + 1) / (8 * math.pi ** (2 * n + 2))
    out.add("closed_form_equator", _rel(spot, expected), 1e-12)
    for r, eta in ((0.5, 1.0), (1.0, 0.5), (0.7, 1.5)):
        out.guarded(
            f"transform_r{r}_eta{eta}",
            1e-3,
            lambda r=r, eta=eta: green.green_transform_check(params, CylPoint(r=r, eta=eta)),
        )
    etas = np.linspace(0.05, math.pi, 40)
    values = np.array([green.green_sphere(params, CylPoint(r=0.6, eta=e)) for e in etas])
    out.add("decreasing_in_eta", float(np.max(np.diff(values))), 0.0, passed=bool(np.all(np.diff(values) < 0)))
    return out.report()


def _suite_cp_routes(params: ModelParams) -> SuiteReport:
    out = _Collector("cp-routes")
    phis = (0.0, 0.5, 1.0, math.pi / 2)
    worst_int, worst_integral = 0.0, 0.0
    try:
        for t in (0.2, 0.5, 1.0):
            for r in (0.0, 0.4, 0.9):
                for phi in phis:
                    pt = CPPoint(r=r, phi=phi)
                    spectral = cp_kernel.h_t_spectral(params, t, pt).value
                    worst_int = max(worst_int, _rel(cp_kernel.h_t_intertwined(params, t, pt).value, spectral))
                    worst_integral = max(worst_integral, _rel(cp_kernel.h_t_integral(params, t, pt).value, spectral))
    except AppError as exc:
        out.add("routes", math.nan, 1e-5, passed=False, details=exc.details)
        return out.report()
    out.add("spectral_vs_intertwined", worst_int, 1e-5)
    out.add("spectral_vs_integral", worst_integral, 1e-5)

    reflected = max(
        _rel(
            cp_kernel.h_t_spectral(params, 0.5, CPPoint(r=0.4, phi=phi)).value,
            cp_kernel.h_t_spectral(params, 0.5, CPPoint(r=0.4, phi=math.pi - phi)).value,
        )
        for phi in (0.2, 0.6, 1.1)
    )
    out.add("phi_reflection", reflected, 1e-10)
    return out.report()


_RATIO_TIMES = (0.04, 0.02, 0.01)


def _ratio_check(out: _Collector, check: str, tolerance: float, ratios: Callable[[], list[float]]) -> None:
    """
    Cocientes oráculo/asintótica en _RATIO_TIMES: pasa si |cociente − 1| decrece
    con t y el último queda dentro de la tolerancia.
    """
    try:
        values = ratios()
    except AppError as exc:
        out.add(check, math.nan, tolerance, passed=False, details=f"{exc.error_code}: {exc.details or exc.message}")
        return
    gaps = [abs(v - 1) for v in values]
    monotone = all(b <= a for a, b in zip(gaps, gaps[1:]))
    details = " ".join(f"t={t}:{v:.4f}" for t, v in zip(_RATIO_TIMES, values))
    out.add(check, gaps[-1], tolerance, passed=gaps[-1] <= tolerance and monotone, details=details)


def _suite_asymptotics(params: ModelParams) -> SuiteReport:
    out = _Collector("asymptotics")

    def sphere_ratios(r: float, eta: float, formula: Callable[[float], float]) -> Callable[[], list[float]]:
        pt = CylPoint(r=r, eta=eta)
        return lambda: [sphere_kernel.p_t_integral(params, t, pt).value / formula(t) for t in _RATIO_TIMES]

    def cp_ratios(phi: float, formula: Callable[[float], float]) -> Callable[[], list[float]]:
        pt = CPPoint(r=0.0, phi=phi)
        return lambda: [cp_kernel.h_t_spectral(params, t, pt).value / formula(t) for t in _RATIO_TIMES]

    _ratio_check(out, "diagonal", 0.02, sphere_ratios(0.0, 0.0, lambda t: asymptotics.p_asym_diagonal(params, t)))
    _ratio_check(
        out, "horizontal_r0.8", 0.05, sphere_ratios(0.8, 0.0, lambda t: asymptotics.p_asym_horizontal(params, t, 0.8))
    )
    _ratio_check(
        out, "vertical_eta1.5", 0.05, sphere_ratios(0.0, 1.5, lambda t: asymptotics.p_asym_vertical(params, t, 1.5))
    )

    # corrección 1 + c·t con c grande en (0.5, 1.0): la extrapolación de Richardson
    # elimina el término lineal y es lo que se compara con el 5 %
    general = sphere_ratios(0.5, 1.0, lambda t: asymptotics.p_asym_general(params, t, 0.5, 1.0))
    try:
        values = general()
        gaps = [abs(v - 1) for v in values]
        extrapolated = 2 * values[2] - values[1]
        out.add(
            "general_r0.5_eta1.0",
            abs(extrapolated - 1),
            0.05,
            passed=abs(extrapolated - 1) <= 0.05 and gaps[2] <= gaps[1] <= gaps[0],
            details=" ".join(f"t={t}:{v:.4f}" for t, v in zip(_RATIO_TIMES, values)),
        )
    except AppError as exc:
        out.add("general_r0.5_eta1.0", math.nan, 0.05, passed=False, details=exc.details)

    _ratio_check(out, "h_diagonal", 0.2, cp_ratios(0.0, lambda t: asymptotics.h_asym_diagonal(params, t)))
    _ratio_check(out, "h_vertical_phi0.7", 0.05, cp_ratios(0.7, lambda t: asymptotics.h_asym_vertical(params, t, 0.7)))
    out.guarded(
        "h_diagonal_integral_form_vs_cut_locus_t0.01",
        0.05,
        lambda: abs(
            asymptotics.h_asym_diagonal_integral(params, 0.01) / asymptotics.h_asym_diagonal_cut_locus(params, 0.01) - 1
        ),
    )
    return out.report()


def _suite_distance(params: ModelParams) -> SuiteReport:
    out = _Collector("distance")
    out.add("diameter_at_pole", abs(asymptotics.subriemannian_distance(0.0, math.pi) - math.pi), 1e-9)
    horizontal = max(abs(asymptotics.subriemannian_distance(r, 0.0) - r) for r in (0.3, 0.8, 1.2))
    out.add("horizontal_distance", horizontal, 1e-6)

    def grid_max() -> float:
        rs = np.linspace(0.0, math.pi / 2, 50, endpoint=False)
        etas = np.linspace(0.0, math.pi, 50)
        return max(asymptotics.subriemannian_distance(float(r), float(e)) for r in rs for e in etas) - math.pi

    out.guarded("grid_maximum_over_pi", 1e-9, grid_max)

    def worst_residual() -> float:
        return max(
            asymptotics.solve_varphi(r, eta).residual for r in (0.2, 0.5, 1.0, 1.4) for eta in (0.1, 1.0, 2.0, 3.0)
        )

    out.guarded("varphi_residual", 1e-12, worst_residual)

    def slope() -> float:
        r, eta = 0.5, 1e-4
        measured = asymptotics.solve_varphi(r, eta).varphi / eta
        return abs(measured - (-2 / asymptotics.horizontal_curvature(r)))

    out.guarded("varphi_slope_at_zero", 1e-4, slope)

    def vertical_dominates() -> float:
        return max(eta - asymptotics.subriemannian_distance(0.0, eta) for eta in np.linspace(0.0, math.pi, 30))

    out.guarded("vertical_distance_exceeds_eta", 1e-12, vertical_dominates)
    return out.report()


def _suite_pde(params: ModelParams) -> SuiteReport:
    out = _Collector("pde")

    def semigroup(which: str, fiber_range: tuple[float, float], window: tuple[float, float]) -> float:
        start = pde_oracle.sample_grid(params, 0.5, (0.2, 1.2), fiber_range, 0.01, which)
        evolved = pde_oracle.evolve(
            params, start, 0.5, 1e-3, 100, which, boundary=pde_oracle.kernel_boundary(params, which)
        )
        target = pde_oracle.sample_grid(params, 0.6, (0.2, 1.2), fiber_range, 0.01, which)
        mask = evolved.window_mask((0.3, 1.1), window)
        return float(np.max(np.abs(evolved.values - target.values)[mask]) / np.max(np.abs(target.values[mask])))

    out.guarded("sphere_semigroup_0.5_to_0.6", 2e-3, lambda: semigroup("sphere", (0.5, 2.6), (0.6, 2.5)))
    out.guarded("cp_semigroup_0.5_to_0.6", 2e-3, lambda: semigroup("cp", (0.2, 1.3), (0.3, 1.2)))

    def stationary() -> float:
        grid = pde_oracle.sample_grid(params, 0.5, (0.2, 1.2), (0.5, 2.6), 0.02, "sphere")
        constant = grid.with_values(np.ones_like(grid.values))
        evolved = pde_oracle.evolve(params, constant, 0.0, 1e-3, 20, "sphere")
        return float(np.max(np.abs(evolved.values - 1)))

    out.guarded("constants_stationary", 1e-10, stationary)

    for which in ("sphere", "cp"):
        for k, m in ((0, 0), (0, 1), (1, 0), (1, 1)):
            expected = pde_oracle.expected_eigenvalue(params, k, m, which)
            out.guarded(
                f"{which}_eigen_k{k}_m{m}",
                1e-6 * max(1.0, abs(expected)),
                lambda k=k, m=m, which=which, expected=expected: abs(
                    pde_oracle.eigen_residual(params, k, m, which) - expected
                ),
            )
    return out.report()


_SUITES: dict[str, Callable[[ModelParams], SuiteReport]] = {
    "orthopoly": _suite_orthopoly,
    "quadrature": _suite_quadrature,
    "cross-rep": _suite_cross_rep,
    "normalization": _suite_normalization,
    "heat-residual": _suite_heat_residual,
    "intertwining": _suite_intertwining,
    "green": _suite_green,
    "cp-routes": _suite_cp_routes,
    "asymptotics": _suite_asymptotics,
    "distance": _suite_distance,
    "pde": _suite_pde,
}


def run_suite(name: Suite, params: ModelParams) -> SuiteReport:
    """Ejecuta una suite (o todas con "all") y devuelve sus comprobaciones."""
    names = SUITE_ORDER if name == "all" else (name,)
    checks: list[CheckResult] = []
    for suite in names:
        report = _SUITES[suite](params)
        logger.info(
            "suite_finished",
            suite=suite,
            n=params.n,
            checks=len(report.checks),
            failures=len(report.failures),
        )
        checks.extend(report.checks)
    return SuiteReport(suite=name, checks=checks)
