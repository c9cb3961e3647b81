"""
services/pde_oracle.py — Oráculo por diferencias finitas de las ecuaciones del calor cilíndricas.

    L̃ = ∂²_r + ((4n−1) cot r − 3 tan r) ∂_r + tan² r (∂²_f + c(f) ∂_f)

con c(η) = 2 cot η en la esfera y c(φ) = 2 cot 2φ en CP^{2n+1}.

El operador se ensambla como matriz dispersa sobre la malla (orden r-mayor):
kron(D²_r + diag(a) D¹_r, I) + kron(diag(tan² r), D²_f + diag(c) D¹_f).
Las filas de borde usan diferencias laterales; `evolve` sólo avanza los nodos
interiores y toma el contorno de Dirichlet de un proveedor (o lo congela).

Uso:
    grid = sample_grid(params, 0.5, (0.2, 1.2), (0.5, 2.6), 0.01, "sphere")
    later = evolve(params, grid, 0.5, 1e-3, 100, "sphere", boundary=kernel_boundary(params, "sphere"))
"""

import math
from collections.abc import Callable
from typing import Literal

import numpy as np
import scipy.sparse as sp
import structlog
from numpy.typing import NDArray
from scipy.sparse.linalg import splu
from scipy.special import eval_jacobi, eval_legendre

from middleware.error_handler import DomainError, GridTooCoarse, LinearSolveFailure
from models.entities import RadialGrid, Which
from models.params import ModelParams, Truncation
from services.orthopoly import vertical_character
from services.spectral import CPSeries, SpectralSeries, SphereSeries

logger = structlog.get_logger(__name__)

MAX_SPACING = 0.05

BoundaryProvider = Callable[[NDArray[np.float64], NDArray[np.float64], float], NDArray[np.float64]]
Scheme = Literal["crank-nicolson", "backward-euler"]


# ── Ensamblado ────────────────────────────────────────────────────────────────


def _first_derivative(size: int, h: float) -> sp.csr_matrix:
    d = sp.lil_matrix((size, size))
    for i in range(1, size - 1):
        d[i, i - 1] = -0.5 / h
        d[i, i + 1] = 0.5 / h
    d[0, 0:3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
    d[size - 1, size - 3 : size] = np.array([1.0, -4.0, 3.0]) / (2 * h)
    return d.tocsr()


def _second_derivative(size: int, h: float) -> sp.csr_matrix:
    d = sp.lil_matrix((size, size))
    for i in range(1, size - 1):
        d[i, i - 1 : i + 2] = np.array([1.0, -2.0, 1.0]) / (h * h)
    d[0, 0:4] = np.array([2.0, -5.0, 4.0, -1.0]) / (h * h)
    d[size - 1, size - 4 : size] = np.array([-1.0, 4.0, -5.0, 2.0]) / (h * h)
    return d.tocsr()


def _fiber_drift(fiber: NDArray[np.float64], which: Which) -> NDArray[np.float64]:
    if which == "sphere":
        return 2 / np.tan(fiber)
    return 2 / np.tan(2 * fiber)


def _check_grid(grid: RadialGrid) -> None:
    if grid.r_nodes.size < 4 or grid.fiber_nodes.size < 4:
        raise DomainError(details="se requieren al menos 4 nodos por eje")
    spacing = max(grid.h_r, grid.h_fiber)
    if spacing > MAX_SPACING:
        raise GridTooCoarse(details=f"paso {spacing:.4f} > {MAX_SPACING}")
    upper = math.pi if grid.which == "sphere" else math.pi / 2
    if grid.r_nodes[0] <= 0 or grid.r_nodes[-1] >= math.pi / 2:
        raise DomainError(details="los nodos en r deben quedar en (0, π/2)")
    if grid.fiber_nodes[0] <= 0 or grid.fiber_nodes[-1] >= upper:
        raise DomainError(details=f"los nodos de fibra deben quedar en (0, {upper:.4f})")


def operator_matrix(params: ModelParams, grid: RadialGrid) -> sp.csr_matrix:
    """Matriz dispersa de L̃ sobre todos los nodos de la malla (orden r-mayor)."""
    _check_grid(grid)
    r, f = grid.r_nodes, grid.fiber_nodes
    n = params.n
    radial = _second_derivative(r.size, grid.h_r) + sp.diags((4 * n - 1) / np.tan(r) - 3 * np.tan(r)) @ _first_derivative(
        r.size, grid.h_r
    )
    fiber = _second_derivative(f.size, grid.h_fiber) + sp.diags(_fiber_drift(f, grid.which)) @ _first_derivative(
        f.size, grid.h_fiber
    )
    op = sp.kron(radial, sp.identity(f.size)) + sp.kron(sp.diags(np.tan(r) ** 2), fiber)
    return op.tocsr()


def apply_operator(params: ModelParams, grid: RadialGrid, which: Which | None = None) -> RadialGrid:
    """L̃f en todos los nodos de la malla; bordes con diferencias laterales."""
    if which is not None and which != grid.which:
        grid = RadialGrid(grid.r_nodes, grid.fiber_nodes, grid.values, which, grid.time)
    values = operator_matrix(params, grid) @ np.asarray(grid.values, dtype=float).ravel()
    return grid.with_values(values.reshape(grid.values.shape), grid.time)


# ── Instantáneas cerradas ─────────────────────────────────────────────────────


def _series_for(params: ModelParams, t_min: float, which: Which, trunc: Truncation | None) -> SpectralSeries:
    cls = SphereSeries if which == "sphere" else CPSeries
    return cls.cached(params, t_min, trunc)


def sample_grid(
    params: ModelParams,
    t: float,
    r_range: tuple[float, float],
    fiber_range: tuple[float, float],
    spacing: float,
    which: Which = "sphere",
    trunc: Truncation | None = None,
) -> RadialGrid:
    """Malla uniforme con los valores cerrados del núcleo en el instante t."""
    r_nodes = _uniform_nodes(*r_range, spacing)
    fiber_nodes = _uniform_nodes(*fiber_range, spacing)
    rr, ff = np.meshgrid(r_nodes, fiber_nodes, indexing="ij")
    series = _series_for(params, t, which, trunc)
    values = series.evaluate(rr.ravel(), ff.ravel(), t)[0].reshape(rr.shape)
    grid = RadialGrid(r_nodes, fiber_nodes, values, which, t)
    _check_grid(grid)
    return grid


def _uniform_nodes(lo: float, hi: float, spacing: float) -> NDArray[np.float64]:
    count = int(round((hi - lo) / spacing)) + 1
    return np.linspace(lo, lo + (count - 1) * spacing, count)


def kernel_boundary(params: ModelParams, which: Which = "sphere", trunc: Truncation | None = None) -> BoundaryProvider:
    """
    Proveedor de Dirichlet con el núcleo cerrado. La tabla de modos se fija en
    la primera llamada y sirve para todos los instantes posteriores.
    """
    state: dict[str, SpectralSeries] = {}

    def provider(r: NDArray[np.float64], fiber: NDArray[np.float64], t: float) -> NDArray[np.float64]:
        if "series" not in state:
            state["series"] = _series_for(params, t, which, trunc)
        return state["series"].evaluate(r, fiber, t)[0]

    return provider


# ── Evolución implícita ───────────────────────────────────────────────────────


def evolve(
    params: ModelParams,
    grid: RadialGrid,
    t0: float,
    dt: float,
    steps: int,
    which: Which | None = None,
    scheme: Scheme = "crank-nicolson",
    boundary: BoundaryProvider | None = None,
) -> RadialGrid:
    """
    Avanza `steps` pasos de tamaño dt con un esquema implícito. Con
    boundary=None los valores de borde de la malla de entrada quedan fijos.
    """
    if which is not None and which != grid.which:
        grid = RadialGrid(grid.r_nodes, grid.fiber_nodes, grid.values, which, grid.time)
    if dt <= 0 or steps < 0:
        raise DomainError(details=f"se requiere dt > 0 y steps ≥ 0 (dt={dt}, steps={steps})")

    op = operator_matrix(params, grid)
    shape = grid.values.shape
    interior_mask = np.zeros(shape, dtype=bool)
    interior_mask[1:-1, 1:-1] = True
    interior = np.flatnonzero(interior_mask.ravel())
    edge = np.flatnonzero(~interior_mask.ravel())

    rows = op[interior]
    a_block = rows[:, interior].tocsc()
    b_block = rows[:, edge].tocsc()
    identity = sp.identity(interior.size, format="csc")

    theta = 0.5 if scheme == "crank-nicolson" else 1.0
    lhs = (identity - theta * dt * a_block).tocsc()
    rhs_op = (identity + (1 - theta) * dt * a_block).tocsr()
    try:
        solver = splu(lhs)
    except RuntimeError as exc:
        raise LinearSolveFailure(details=str(exc)) from exc

    rr, ff = np.meshgrid(grid.r_nodes, grid.fiber_nodes, indexing="ij")
    r_edge, f_edge = rr.ravel()[edge], ff.ravel()[edge]
    flat = np.asarray(grid.values, dtype=float).ravel().copy()
    u = flat[interior]
    g_now = flat[edge]

    for step in range(steps):
        t_next = t0 + (step + 1) * dt
        g_next = g_now if boundary is None else boundary(r_edge, f_edge, t_next)
        rhs = rhs_op @ u + dt * (b_block @ (theta * g_next + (1 - theta) * g_now))
        u = solver.solve(rhs)
        if not np.all(np.isfinite(u)):
            raise LinearSolveFailure(details=f"valores no finitos en el paso {step + 1}")
        g_now = g_next

    flat[interior] = u
    flat[edge] = g_now
    logger.debug("evolve_finished", which=grid.which, steps=steps, dt=dt, scheme=scheme, unknowns=interior.size)
    return grid.with_values(flat.reshape(shape), t0 + steps * dt)


# ── Residuos ──────────────────────────────────────────────────────────────────


def heat_equation_terms(
    params: ModelParams,
    t: float,
    r: NDArray[np.float64],
    fiber: NDArray[np.float64],
    which: Which = "sphere",
    h_space: float = 1e-3,
    h_time: float = 1e-4,
    trunc: Truncation | None = None,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """(∂_t k, L̃k) por diferencias centrales sobre la forma cerrada en los puntos dados."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    fiber = np.atleast_1d(np.asarray(fiber, dtype=float))
    series = _series_for(params, t - h_time, which, trunc)

    def k(rs: NDArray[np.float64], fs: NDArray[np.float64], times: list[float]) -> NDArray[np.float64]:
        return series.evaluate(rs, fs, times)

    in_time = k(r, fiber, [t - h_time, t, t + h_time])
    dk_dt = (in_time[2] - in_time[0]) / (2 * h_time)
    center = in_time[1]
    r_plus, r_minus = k(r + h_space, fiber, [t])[0], k(r - h_space, fiber, [t])[0]
    f_plus, f_minus = k(r, fiber + h_space, [t])[0], k(r, fiber - h_space, [t])[0]

    n = params.n
    d_rr = (r_plus - 2 * center + r_minus) / h_space**2
    d_r = (r_plus - r_minus) / (2 * h_space)
    d_ff = (f_plus - 2 * center + f_minus) / h_space**2
    d_f = (f_plus - f_minus) / (2 * h_space)
    lk = d_rr + ((4 * n - 1) / np.tan(r) - 3 * np.tan(r)) * d_r + np.tan(r) ** 2 * (d_ff + _fiber_drift(fiber, which) * d_f)
    return dk_dt, lk


def heat_equation_residual(
    params: ModelParams,
    t: float,
    r: NDArray[np.float64],
    fiber: NDArray[np.float64],
    which: Which = "sphere",
    h_space: float = 1e-3,
    h_time: float = 1e-4,
) -> NDArray[np.float64]:
    """|∂_t k − L̃k| en cada punto."""
    dk_dt, lk = heat_equation_terms(params, t, r, fiber, which, h_space, h_time)
    return np.abs(dk_dt - lk)


def eigenfunction(params: ModelParams, k: int, m: int, which: Which) -> Callable[[NDArray, NDArray], NDArray]:
    """Autofunción (k, m) de L̃: factor de fibra · (cos r)^{a·m} · P_k(cos 2r)."""
    alpha = 2 * params.n - 1
    if which == "sphere":

        def f(r, fiber):
            return vertical_character(m, fiber) * np.cos(r) ** m * eval_jacobi(k, alpha, m + 1, np.cos(2 * r))

    else:

        def f(r, fiber):
            return eval_legendre(m, np.cos(2 * fiber)) * np.cos(r) ** (2 * m) * eval_jacobi(k, alpha, 2 * m + 1, np.cos(2 * r))

    return f


def expected_eigenvalue(params: ModelParams, k: int, m: int, which: Which) -> float:
    """−λ_{k,m} según el exponente de la serie espectral correspondiente."""
    n = params.n
    if which == "sphere":
        return -4.0 * (k * (k + 2 * n + m + 1) + n * m)
    return -(4.0 * k * (k + 2 * n + 2 * m + 1) + 8.0 * n * m)


def eigen_residual(
    params: ModelParams,
    k: int,
    m: int,
    which: Which = "sphere",
    window: tuple[tuple[float, float], tuple[float, float]] = ((0.4, 0.6), (0.5, 0.7)),
    spacing: float = 1e-3,
) -> float:
    """
    Estimación de autovalor ⟨L̃f, f⟩/⟨f, f⟩ en los nodos interiores de la ventana,
    con extrapolación de Richardson entre los pasos h y h/2.
    """
    f = eigenfunction(params, k, m, which)

    def rayleigh(h: float) -> float:
        r_nodes = _uniform_nodes(*window[0], h)
        fiber_nodes = _uniform_nodes(*window[1], h)
        rr, ff = np.meshgrid(r_nodes, fiber_nodes, indexing="ij")
        values = f(rr, ff)
        lf = apply_operator(params, RadialGrid(r_nodes, fiber_nodes, values, which)).values
        inner = (slice(1, -1), slice(1, -1))
        return float(np.sum(lf[inner] * values[inner]) / np.sum(values[inner] ** 2))

    coarse = rayleigh(spacing)
    fine = rayleigh(spacing / 2)
    estimate = (4 * fine - coarse) / 3
    logger.debug("eigen_estimate", which=which, k=k, m=m, coarse=coarse, fine=fine, estimate=estimate)
    return estimate
