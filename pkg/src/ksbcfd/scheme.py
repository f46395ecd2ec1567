"""The decoupled, mass-conservative time stepper.

State variables live at cell centers: ``u`` approximates the cell density
and ``z`` the chemoattractant concentration.  One run consists of

1. a prediction-correction start-up step producing second-order accurate
   first-level values: a backward-Euler predictor for the density, a
   semi-implicit Crank-Nicolson solve for the concentration, then a fully
   implicit Crank-Nicolson corrector for the density;
2. Crank-Nicolson marching for all later steps, where the concentration
   solve is decoupled from the density solve through the explicit
   second-order extrapolation  u* = (3 u^n - u^{n-1}) / 2.

The nonlinear cross-diffusion flux uses cell values interpolated to edge
points times the staggered concentration gradient; a product carrying the
half-level superscript is discretized as the average of the products at the
two adjacent time levels, which keeps every system linear in its single
unknown level.

Every discrete equation row is scaled by its cell area before assembly.
This makes the concentration matrix exactly symmetric (solved with CG) and
gives both operators zero column sums, so the total weighted density is
conserved up to the linear-solver residual.  The density matrix is
nonsymmetric whenever the concentration gradient is nonzero and is solved
with BiCGStab.  The constant concentration matrix is assembled once per run;
density matrices are rebuilt every step because their coefficients depend on
the current concentration gradient.

Manufactured problems add pointwise forcing sampled at cell centers at the
half-level time (at the full first-level time in the backward-Euler
predictor).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import linalg
from .fields import (
    CellField,
    EdgeFieldX,
    EdgeFieldY,
    GradientPair,
    Dx,
    Dy,
    cell_field_from_function,
    delta_correction,
    dx,
    dy,
    edge_x_from_function,
    edge_y_from_function,
    grad,
    inner_m,
    interp_x,
    interp_y,
    norm_m,
    norm_tm,
)
from .grid import StaggeredGrid2D
from .linalg import SolveReport, SparseMatrix
from .problems import ProblemSpec

__all__ = [
    "SchemeConfig",
    "State",
    "StepDiagnostics",
    "RunResult",
    "Workspace",
    "BlowUpDetected",
    "StepSolveError",
    "UniquenessConditionWarning",
    "apply_laplacian",
    "apply_chemotaxis",
    "weighted_laplacian_matrix",
    "weighted_chemotaxis_matrix",
    "assemble_z_system",
    "assemble_u_system",
    "init_state",
    "predict_u1",
    "solve_z_first",
    "correct_u1",
    "first_step",
    "step_cn",
    "run",
    "error_norms",
]


class BlowUpDetected(RuntimeError):
    """The density exceeded the blow-up threshold or went non-finite."""

    def __init__(self, t: float, step: int, state: "State", diagnostics: "StepDiagnostics"):
        super().__init__(f"blow-up detected at t={t} (step {step})")
        self.t = t
        self.step = step
        self.state = state
        self.diagnostics = diagnostics


class StepSolveError(RuntimeError):
    """A linear solve failed to converge."""

    def __init__(self, step: int, system: str, report: SolveReport):
        super().__init__(
            f"{system} solve failed at step {step}: "
            f"{report.iterations} iterations, relative residual {report.final_relative_residual:.3e}"
        )
        self.step = step
        self.system = system
        self.report = report


class UniquenessConditionWarning(UserWarning):
    """The advisory time-step bound for solvability was violated."""


# How many ULPs of slack the integer-step-count check allows; division noise
# makes an exact half-ULP test brittle for steps like 1/80.
_STEP_COUNT_ULPS = 64


@dataclass(frozen=True)
class SchemeConfig:
    lam: float
    tau: float
    t_final: float
    solver_tol: float = 1e-12
    blowup_threshold: float = 1e12
    uniqueness_monitor: bool = True

    def __post_init__(self):
        for name in ("lam", "tau", "t_final", "solver_tol", "blowup_threshold"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        ratio = self.t_final / self.tau
        n = round(ratio)
        if n < 1 or abs(ratio - n) > _STEP_COUNT_ULPS * np.spacing(max(1.0, float(n))):
            raise ValueError(f"t_final/tau = {ratio!r} is not an integer step count")

    @property
    def n_steps(self) -> int:
        return round(self.t_final / self.tau)


@dataclass(frozen=True)
class State:
    """Discrete solution at one time level (u_prev kept for extrapolation)."""

    t: float
    n: int
    u_curr: CellField
    u_prev: CellField | None
    z_curr: CellField


@dataclass(frozen=True)
class StepDiagnostics:
    t: float
    mass: float
    u_max: float
    u_min: float
    z_max: float
    argmax_u: tuple[int, int]
    solver_iters_z: int
    solver_iters_u: int
    residual_z: float
    residual_u: float
    dz_inf: float
    uniqueness_ok: bool


@dataclass
class RunResult:
    state: State
    diagnostics: list[StepDiagnostics]
    blew_up: bool = False
    blow_up_time: float | None = None


# ---------------------------------------------------------------------------
# stencil application (used for right-hand sides and residual checks)


def apply_laplacian(p: CellField) -> CellField:
    """Discrete Laplacian: divergence of the zero-boundary-flux gradient."""
    return CellField(p.grid, Dx(dx(p)).values + Dy(dy(p)).values)


def apply_chemotaxis(p: CellField, g: GradientPair) -> CellField:
    """Divergence of (interpolated p) * g, the cross-diffusion flux."""
    fx = EdgeFieldX(p.grid, interp_x(p).values * g.gx.values)
    fy = EdgeFieldY(p.grid, interp_y(p).values * g.gy.values)
    return CellField(p.grid, Dx(fx).values + Dy(fy).values)


# ---------------------------------------------------------------------------
# matrix assembly (rows scaled by cell areas)
#
# Unknown vectors flatten cell (i, j) to k = i + nx * j (the x index varies
# fastest); this order is fixed so assembled matrices are comparable across
# runs and against golden values.


def _flat_index(grid: StaggeredGrid2D) -> np.ndarray:
    nx, ny = grid.shape
    return np.arange(nx * ny).reshape((nx, ny), order="F")


def weighted_laplacian_matrix(grid: StaggeredGrid2D) -> SparseMatrix:
    """Area-weighted discrete Laplacian; symmetric negative semidefinite."""
    nx, ny = grid.shape
    k = _flat_index(grid)
    dxw, dyw = grid.x_axis.cell_widths, grid.y_axis.cell_widths
    dxd, dyd = grid.x_axis.dual_widths, grid.y_axis.dual_widths

    # interior x-edges couple (i, j) and (i+1, j)
    ce = (dyw[None, :] / dxd[:, None]).ravel()
    kl = k[:-1, :].ravel()
    kr = k[1:, :].ravel()
    # interior y-edges couple (i, j) and (i, j+1)
    cf = (dxw[:, None] / dyd[None, :]).ravel()
    kb = k[:, :-1].ravel()
    kt = k[:, 1:].ravel()

    rows = np.concatenate([kl, kl, kr, kr, kb, kb, kt, kt])
    cols = np.concatenate([kl, kr, kr, kl, kb, kt, kt, kb])
    vals = np.concatenate([-ce, ce, -ce, ce, -cf, cf, -cf, cf])
    n = nx * ny
    return linalg.coo_arrays_to_matrix(n, n, rows, cols, vals)


def weighted_chemotaxis_matrix(grid: StaggeredGrid2D, g: GradientPair) -> SparseMatrix:
    """Area-weighted divergence of (interpolated cell values) * g."""
    nx, ny = grid.shape
    k = _flat_index(grid)
    dxw, dyw = grid.x_axis.cell_widths, grid.y_axis.cell_widths
    dxd, dyd = grid.x_axis.dual_widths, grid.y_axis.dual_widths

    gx = g.gx.values[1:-1, :]  # interior x-edges
    coef_l = (dyw[None, :] * gx * dxw[1:, None] / (2.0 * dxd[:, None])).ravel()
    coef_r = (dyw[None, :] * gx * dxw[:-1, None] / (2.0 * dxd[:, None])).ravel()
    kl = k[:-1, :].ravel()
    kr = k[1:, :].ravel()

    gy = g.gy.values[:, 1:-1]  # interior y-edges
    coef_b = (dxw[:, None] * gy * dyw[None, 1:] / (2.0 * dyd[None, :])).ravel()
    coef_t = (dxw[:, None] * gy * dyw[None, :-1] / (2.0 * dyd[None, :])).ravel()
    kb = k[:, :-1].ravel()
    kt = k[:, 1:].ravel()

    rows = np.concatenate([kl, kl, kr, kr, kb, kb, kt, kt])
    cols = np.concatenate([kl, kr, kl, kr, kb, kt, kb, kt])
    vals = np.concatenate([coef_l, coef_r, -coef_l, -coef_r, coef_b, coef_t, -coef_b, -coef_t])
    n = nx * ny
    return linalg.coo_arrays_to_matrix(n, n, rows, cols, vals)


def assemble_z_system(grid: StaggeredGrid2D, tau: float) -> SparseMatrix:
    """Concentration system (1/tau + 1/2) W - (1/2) W L; SPD."""
    w = grid.cell_areas.ravel(order="F")
    wl = weighted_laplacian_matrix(grid)._csr
    a = sp.diags((1.0 / tau + 0.5) * w) - 0.5 * wl
    return linalg.from_scipy_csr(a.tocsr())


def assemble_u_system(grid: StaggeredGrid2D, tau: float, lam: float, g: GradientPair,
                      backward_euler: bool = False) -> SparseMatrix:
    """Density system; nonsymmetric whenever g is nonzero.

    Crank-Nicolson form: (1/tau) W - (1/2) W L + (lam/2) W C(g).
    Backward-Euler (predictor) form: (1/tau) W - W L + lam W C(g).
    """
    w = grid.cell_areas.ravel(order="F")
    wl = weighted_laplacian_matrix(grid)._csr
    wc = weighted_chemotaxis_matrix(grid, g)._csr
    theta = 1.0 if backward_euler else 0.5
    a = sp.diags(w / tau) - theta * wl + (theta * lam) * wc
    return linalg.from_scipy_csr(a.tocsr())


class Workspace:
    """Per-run operator cache: area weights and the constant matrices."""

    def __init__(self, grid: StaggeredGrid2D, config: SchemeConfig):
        self.grid = grid
        self.config = config
        self.areas = grid.cell_areas.ravel(order="F")
        self.weighted_laplacian = weighted_laplacian_matrix(grid)
        self.z_system = assemble_z_system(grid, config.tau)

    def u_system(self, g: GradientPair, backward_euler: bool = False) -> SparseMatrix:
        w = self.areas
        tau, lam = self.config.tau, self.config.lam
        theta = 1.0 if backward_euler else 0.5
        wc = weighted_chemotaxis_matrix(self.grid, g)._csr
        a = sp.diags(w / tau) - theta * self.weighted_laplacian._csr + (theta * lam) * wc
        return linalg.from_scipy_csr(a.tocsr())


# ---------------------------------------------------------------------------
# forcing helpers


def _sample_forcing(fn: Callable | None, grid: StaggeredGrid2D, t: float):
    if fn is None:
        return 0.0
    xs = grid.x_axis.centers[:, None]
    ys = grid.y_axis.centers[None, :]
    return np.broadcast_to(fn(xs, ys, t), grid.shape)


def _forcing_rho(problem: ProblemSpec, grid: StaggeredGrid2D, t: float):
    return _sample_forcing(problem.forcing.f_rho if problem.forcing else None, grid, t)


def _forcing_c(problem: ProblemSpec, grid: StaggeredGrid2D, t: float):
    return _sample_forcing(problem.forcing.f_c if problem.forcing else None, grid, t)


# ---------------------------------------------------------------------------
# the scheme


def init_state(problem: ProblemSpec, grid: StaggeredGrid2D) -> State:
    """Sample the initial data.

    The density starts from pointwise samples; the concentration subtracts
    the second-derivative correction so the discrete initial gradient is
    second-order accurate on non-uniform grids.
    """
    if problem.c0_xx is None or problem.c0_yy is None:
        raise ValueError(
            f"problem {problem.name!r} lacks closed-form second derivatives of the "
            "initial concentration, required by the discrete initial condition"
        )
    u0 = cell_field_from_function(grid, problem.rho0)
    c0 = cell_field_from_function(grid, problem.c0)
    corr = delta_correction(
        cell_field_from_function(grid, problem.c0_xx),
        cell_field_from_function(grid, problem.c0_yy),
    )
    z0 = CellField(grid, c0.values - corr.values)
    return State(t=0.0, n=0, u_curr=u0, u_prev=None, z_curr=z0)


def _solve(system: SparseMatrix, rhs: np.ndarray, config: SchemeConfig, symmetric: bool,
           step: int, name: str, warm_start: CellField | None = None) -> tuple[np.ndarray, SolveReport]:
    solver = linalg.cg if symmetric else linalg.bicgstab
    x0 = None if warm_start is None else np.ravel(warm_start.values, order="F")
    x, report = solver(system, rhs, tol=config.solver_tol, x0=x0)
    if not report.converged:
        raise StepSolveError(step, name, report)
    return x, report


def predict_u1(state: State, config: SchemeConfig, problem: ProblemSpec,
               ws: Workspace | None = None) -> tuple[CellField, SolveReport]:
    """Backward-Euler density predictor for the first level."""
    if state.n != 0:
        raise ValueError("the predictor runs from the initial level only")
    grid = state.u_curr.grid
    ws = ws or Workspace(grid, config)
    g0 = grad(state.z_curr)
    system = ws.u_system(g0, backward_euler=True)
    rhs_vals = state.u_curr.values / config.tau + _forcing_rho(problem, grid, config.tau)
    rhs = ws.areas * np.ravel(rhs_vals, order="F")
    x, report = _solve(system, rhs, config, symmetric=False, step=1,
                       name="density predictor", warm_start=state.u_curr)
    return CellField(grid, x.reshape(grid.shape, order="F")), report


def solve_z_first(state: State, u_bar: CellField, config: SchemeConfig, problem: ProblemSpec,
                  ws: Workspace | None = None) -> tuple[CellField, SolveReport]:
    """Crank-Nicolson concentration solve on the first step."""
    grid = state.u_curr.grid
    ws = ws or Workspace(grid, config)
    tau = config.tau
    z0 = state.z_curr
    rhs_vals = (
        (1.0 / tau - 0.5) * z0.values
        + 0.5 * apply_laplacian(z0).values
        + 0.5 * (u_bar.values + state.u_curr.values)
        + _forcing_c(problem, grid, 0.5 * tau)
    )
    rhs = ws.areas * np.ravel(rhs_vals, order="F")
    x, report = _solve(ws.z_system, rhs, config, symmetric=True, step=1,
                       name="concentration", warm_start=state.z_curr)
    return CellField(grid, x.reshape(grid.shape, order="F")), report


def correct_u1(state: State, z_new: CellField, config: SchemeConfig, problem: ProblemSpec,
               ws: Workspace | None = None) -> tuple[CellField, SolveReport]:
    """Fully implicit Crank-Nicolson density corrector for the first level."""
    grid = state.u_curr.grid
    ws = ws or Workspace(grid, config)
    tau, lam = config.tau, config.lam
    u0, z0 = state.u_curr, state.z_curr
    system = ws.u_system(grad(z_new))
    rhs_vals = (
        u0.values / tau
        + 0.5 * apply_laplacian(u0).values
        - 0.5 * lam * apply_chemotaxis(u0, grad(z0)).values
        + _forcing_rho(problem, grid, 0.5 * tau)
    )
    rhs = ws.areas * np.ravel(rhs_vals, order="F")
    x, report = _solve(system, rhs, config, symmetric=False, step=1,
                       name="density corrector", warm_start=state.u_curr)
    return CellField(grid, x.reshape(grid.shape, order="F")), report


def _diagnostics(t: float, u: CellField, z: CellField, config: SchemeConfig,
                 rep_z: SolveReport, rep_u: SolveReport, iters_u: int) -> StepDiagnostics:
    dz_inf = grad(z).inf_norm()
    ones = CellField(u.grid, np.ones(u.grid.shape))
    return StepDiagnostics(
        t=t,
        mass=inner_m(u, ones),
        u_max=u.max(),
        u_min=u.min(),
        z_max=z.max(),
        argmax_u=u.argmax(),
        solver_iters_z=rep_z.iterations,
        solver_iters_u=iters_u,
        residual_z=rep_z.final_relative_residual,
        residual_u=rep_u.final_relative_residual,
        dz_inf=dz_inf,
        uniqueness_ok=bool(config.tau < 4.0 / (config.lam**2 * (dz_inf + 1.0) ** 2)),
    )


def _check_blowup(state: State, diag: StepDiagnostics, config: SchemeConfig) -> None:
    u, z = state.u_curr, state.z_curr
    if u.max_abs() > config.blowup_threshold or not u.is_finite() or not z.is_finite():
        raise BlowUpDetected(state.t, state.n, state, diag)


def first_step(state: State, config: SchemeConfig, problem: ProblemSpec,
               ws: Workspace | None = None) -> tuple[State, StepDiagnostics]:
    """Prediction, concentration solve, and correction for level one."""
    ws = ws or Workspace(state.u_curr.grid, config)
    u_bar, rep_pred = predict_u1(state, config, problem, ws)
    z1, rep_z = solve_z_first(state, u_bar, config, problem, ws)
    u1, rep_u = correct_u1(state, z1, config, problem, ws)
    new_state = State(t=config.tau, n=1, u_curr=u1, u_prev=state.u_curr, z_curr=z1)
    diag = _diagnostics(
        new_state.t, u1, z1, config, rep_z,
        SolveReport(
            converged=rep_pred.converged and rep_u.converged,
            iterations=rep_pred.iterations + rep_u.iterations,
            final_relative_residual=max(rep_pred.final_relative_residual,
                                        rep_u.final_relative_residual),
        ),
        iters_u=rep_pred.iterations + rep_u.iterations,
    )
    _check_blowup(new_state, diag, config)
    return new_state, diag


def step_cn(state: State, config: SchemeConfig, problem: ProblemSpec,
            ws: Workspace | None = None) -> tuple[State, StepDiagnostics]:
    """One Crank-Nicolson step: concentration first, then density."""
    if state.n < 1 or state.u_prev is None:
        raise ValueError("Crank-Nicolson marching needs two density levels; run the first step")
    grid = state.u_curr.grid
    ws = ws or Workspace(grid, config)
    tau, lam = config.tau, config.lam
    t_half = (state.n + 0.5) * tau
    u_n, z_n = state.u_curr, state.z_curr

    u_star = 1.5 * u_n.values - 0.5 * state.u_prev.values
    rhs_vals = (
        (1.0 / tau - 0.5) * z_n.values
        + 0.5 * apply_laplacian(z_n).values
        + u_star
        + _forcing_c(problem, grid, t_half)
    )
    rhs = ws.areas * np.ravel(rhs_vals, order="F")
    xz, rep_z = _solve(ws.z_system, rhs, config, symmetric=True, step=state.n + 1,
                       name="concentration", warm_start=z_n)
    z_next = CellField(grid, xz.reshape(grid.shape, order="F"))

    system = ws.u_system(grad(z_next))
    rhs_vals = (
        u_n.values / tau
        + 0.5 * apply_laplacian(u_n).values
        - 0.5 * lam * apply_chemotaxis(u_n, grad(z_n)).values
        + _forcing_rho(problem, grid, t_half)
    )
    rhs = ws.areas * np.ravel(rhs_vals, order="F")
    xu, rep_u = _solve(system, rhs, config, symmetric=False, step=state.n + 1, name="density",
                       warm_start=u_n)
    u_next = CellField(grid, xu.reshape(grid.shape, order="F"))

    new_state = State(t=(state.n + 1) * tau, n=state.n + 1, u_curr=u_next, u_prev=u_n,
                      z_curr=z_next)
    diag = _diagnostics(new_state.t, u_next, z_next, config, rep_z, rep_u,
                        iters_u=rep_u.iterations)
    _check_blowup(new_state, diag, config)
    return new_state, diag


def run(problem: ProblemSpec, grid: StaggeredGrid2D, config: SchemeConfig,
        on_step: Callable[[State], None] | None = None) -> RunResult:
    """March from the initial data to t_final or until blow-up halts the run.

    The advisory solvability monitor compares the time step against
    4 / (lam^2 (|dZ|_inf + 1)^2), substituting the observed concentration
    gradient bound for the unobservable continuous one; violations warn once
    per run and are recorded per step.
    """
    state = init_state(problem, grid)
    ws = Workspace(grid, config)
    if on_step is not None:
        on_step(state)
    diagnostics: list[StepDiagnostics] = []
    warned = False

    def record(d: StepDiagnostics) -> None:
        nonlocal warned
        diagnostics.append(d)
        if config.uniqueness_monitor and not d.uniqueness_ok and not warned:
            warnings.warn(
                f"time step {config.tau} exceeds the advisory solvability bound "
                f"4/(lam^2 (|dZ|_inf + 1)^2) at t={d.t}",
                UniquenessConditionWarning,
                stacklevel=2,
            )
            warned = True

    try:
        state, diag = first_step(state, config, problem, ws)
        record(diag)
        if on_step is not None:
            on_step(state)
        while state.n < config.n_steps:
            state, diag = step_cn(state, config, problem, ws)
            record(diag)
            if on_step is not None:
                on_step(state)
    except BlowUpDetected as blow:
        record(blow.diagnostics)
        if on_step is not None:
            on_step(blow.state)
        return RunResult(state=blow.state, diagnostics=diagnostics, blew_up=True,
                         blow_up_time=blow.t)
    return RunResult(state=state, diagnostics=diagnostics)


def error_norms(state: State, problem: ProblemSpec) -> tuple[float, float, float]:
    """Cell-norm errors of density and concentration plus the staggered
    gradient-norm error of the concentration, against the exact solution."""
    if problem.exact is None:
        raise ValueError(f"problem {problem.name!r} has no exact solution")
    grid = state.u_curr.grid
    t = state.t
    ex = problem.exact
    rho_exact = cell_field_from_function(grid, lambda x, y: ex.rho(x, y, t))
    c_exact = cell_field_from_function(grid, lambda x, y: ex.c(x, y, t))
    e_rho = norm_m(CellField(grid, rho_exact.values - state.u_curr.values))
    e_c = norm_m(CellField(grid, c_exact.values - state.z_curr.values))

    cx_exact = edge_x_from_function(grid, lambda x, y: ex.c_x(x, y, t))
    cy_exact = edge_y_from_function(grid, lambda x, y: ex.c_y(x, y, t))
    gz = grad(state.z_curr)
    diff = GradientPair(
        EdgeFieldX(grid, cx_exact.values - gz.gx.values),
        EdgeFieldY(grid, cy_exact.values - gz.gy.values),
    )
    return e_rho, e_c, norm_tm(diff)
