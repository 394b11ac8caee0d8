"""Dirichlet problems for the minimal surface equation over a chart metric.

The residual is the flux form ``(1/sqrt(sigma)) d_i(sqrt(sigma) u^i / W)``
obtained from the discrete area functional in :mod:`minigraph.discrete`;
Newton uses its exact Jacobian.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import discrete
from .fields import Mesh, ScalarField, grid_derivatives, polar_mesh
from .metric import ChartMetric

log = logging.getLogger(__name__)

__all__ = [
    "SolverError",
    "DirichletProblem",
    "SolverConfig",
    "Solution",
    "ContinuationResult",
    "FamilyMember",
    "FamilyReport",
    "assemble_residual",
    "assemble_jacobian",
    "newton_solve",
    "continuation_solve",
    "annulus_family",
    "annulus_problem",
    "maximum_principle_check",
    "gradient_sup",
    "solution_from_field",
]


class SolverError(RuntimeError):
    """Linear-algebra breakdown inside Newton."""


@dataclass(eq=False)
class DirichletProblem:
    metric: ChartMetric
    mesh: Mesh
    boundary_data: np.ndarray
    symmetry: bool = False

    def __post_init__(self):
        bd = self.boundary_data
        if isinstance(bd, ScalarField):
            bd = bd.values
        bd = np.asarray(bd, dtype=float)
        if bd.shape != self.mesh.shape:
            raise ValueError("boundary_data must have one value per mesh node")
        if not np.all(np.isfinite(bd[self.mesh.boundary_mask])):
            raise ValueError("boundary data must be finite")
        self.boundary_data = bd
        self.metric.check_domain(self.mesh.coords())
        if self.symmetry and (self.mesh.kind != "polar" or self.mesh.shape[1] != 1):
            raise ValueError("the radial symmetry flag needs a polar mesh with n_theta == 1")
        self._cells = None

    @property
    def cells(self) -> discrete.CellData:
        if self._cells is None:
            self._cells = discrete.cell_data(self.metric, self.mesh)
        return self._cells

    @property
    def boundary_values(self) -> np.ndarray:
        return self.boundary_data[self.mesh.boundary_mask]

    def boundary_lift(self) -> np.ndarray:
        """Boundary data on the boundary, zero inside."""
        u = np.zeros(self.mesh.shape)
        mask = self.mesh.boundary_mask
        u[mask] = self.boundary_data[mask]
        return u

    def initial_guess(self) -> np.ndarray:
        """Solution of the linearization at u = 0 (the metric Laplace problem)."""
        u = self.boundary_lift()
        if not np.any(u):
            return u
        H0 = discrete.area_hessian(self.cells, np.zeros(u.size))
        flat = self.mesh.boundary_mask.ravel()
        inner, outer = np.flatnonzero(~flat), np.flatnonzero(flat)
        rhs = -(H0[inner][:, outer] @ u.ravel()[outer])
        u.ravel()[inner] = spla.spsolve(H0[inner][:, inner].tocsc(), rhs)
        return u

    def scaled(self, factor: float) -> "DirichletProblem":
        return DirichletProblem(self.metric, self.mesh, factor * self.boundary_data, self.symmetry)


@dataclass
class SolverConfig:
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    damping: float = 0.5
    min_step: float = 2.0 ** -20
    continuation_steps: int = 10
    linear_solver_tol: float = 1e-12

    def __post_init__(self):
        for name in ("newton_tol", "max_newton_iters", "damping", "min_step", "linear_solver_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.damping < 1:
            raise ValueError("damping factor must lie in (0, 1)")
        if self.continuation_steps < 1:
            raise ValueError("continuation_steps must be >= 1")


@dataclass(eq=False)
class Solution:
    u: ScalarField
    residual_norm: float
    newton_iterations_per_step: list[int]
    gradient_sup: float
    min_u: float
    max_u: float
    converged: bool
    problem: DirichletProblem
    residual_history: list[float] = field(default_factory=list)
    message: str = ""


def assemble_residual(problem: DirichletProblem, u) -> np.ndarray:
    """Per-node flux-form residual; zero on boundary nodes."""
    values = u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=float)
    if not np.all(np.isfinite(values)):
        raise FloatingPointError("NaN or inf in the height field")
    cd = problem.cells
    grad = discrete.area_gradient(cd, values.ravel())
    res = -grad / cd.node_volume
    res[problem.mesh.boundary_mask.ravel()] = 0.0
    return res.reshape(problem.mesh.shape)


def assemble_jacobian(problem: DirichletProblem, u):
    """Jacobian of the interior residual with respect to interior values (CSR)."""
    values = u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=float)
    cd = problem.cells
    H = discrete.area_hessian(cd, values.ravel())
    interior = np.flatnonzero(problem.mesh.interior_mask.ravel())
    J = -H[interior][:, interior]
    scale = 1.0 / cd.node_volume[interior]
    return J.multiply(scale[:, None]).tocsc(), interior


def gradient_sup(metric: ChartMetric, u: ScalarField) -> float:
    """sup over all nodes of |grad^M u| (one-sided stencils on the boundary)."""
    du, _, _ = grid_derivatives(u)
    inv = np.linalg.inv(metric.sigma(u.mesh.coords()))
    return float(np.sqrt(np.max(np.einsum("...i,...ij,...j->...", du, inv, du))))


def _make_solution(problem, u, res_norm, iters, converged, history, message=""):
    field_ = ScalarField(problem.mesh, u)
    interior = problem.mesh.interior_mask
    return Solution(
        u=field_,
        residual_norm=float(res_norm),
        newton_iterations_per_step=list(iters),
        gradient_sup=gradient_sup(problem.metric, field_),
        min_u=float(np.min(u[interior])),
        max_u=float(np.max(u[interior])),
        converged=converged,
        problem=problem,
        residual_history=list(history),
        message=message,
    )


def solution_from_field(problem: DirichletProblem, u) -> Solution:
    """Wrap a stored height field as a Solution, measuring its residual.

    ``converged`` is judged against the default Newton tolerance.
    """
    values = u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=float)
    sup = float(np.max(np.abs(assemble_residual(problem, values))))
    return _make_solution(problem, values, sup, [], sup <= SolverConfig().newton_tol, [sup])


def _newton(problem: DirichletProblem, u0: np.ndarray, config: SolverConfig):
    u = np.array(u0, dtype=float)
    mask = problem.mesh.boundary_mask
    u[mask] = problem.boundary_data[mask]
    res = assemble_residual(problem, u)
    sup = float(np.max(np.abs(res)))
    history = [sup]
    it = 0
    while sup > config.newton_tol:
        if it >= config.max_newton_iters:
            return u, sup, it, False, history, "maximum Newton iterations reached"
        J, interior = assemble_jacobian(problem, u)
        rhs = -res.ravel()[interior]
        try:
            du = spla.spsolve(J, rhs)
        except RuntimeError as exc:  # singular factorization
            raise SolverError(str(exc)) from exc
        if not np.all(np.isfinite(du)):
            raise SolverError("linear solve produced non-finite values")
        rel = np.linalg.norm(J @ du - rhs) / max(np.linalg.norm(rhs), 1e-300)
        if rel > 1e-6:
            raise SolverError(f"linear solve residual {rel:.2e} above tolerance")
        norm0 = np.linalg.norm(res)
        step = 1.0
        while True:
            trial = u.copy()
            trial.ravel()[interior] += step * du
            res_t = assemble_residual(problem, trial)
            if np.linalg.norm(res_t) <= (1.0 - 1e-4 * step) * norm0 or np.max(np.abs(res_t)) <= config.newton_tol:
                break
            step *= config.damping
            if step < config.min_step:
                return u, sup, it, False, history, "damping floor reached"
        u, res = trial, res_t
        sup = float(np.max(np.abs(res)))
        history.append(sup)
        it += 1
    return u, sup, it, True, history, ""


def newton_solve(problem: DirichletProblem, u_init=None, config: SolverConfig | None = None) -> Solution:
    """Damped Newton on the discrete residual.

    On nonconvergence the last iterate is returned with ``converged=False``.
    """
    config = SolverConfig() if config is None else config
    if u_init is None:
        u0 = problem.initial_guess()
    else:
        u0 = u_init.values if isinstance(u_init, ScalarField) else np.asarray(u_init, dtype=float)
    u, sup, it, ok, history, msg = _newton(problem, u0, config)
    if not ok:
        log.warning("Newton did not converge: %s (residual %.3e)", msg, sup)
    return _make_solution(problem, u, sup, [it], ok, history, msg)


@dataclass(eq=False)
class ContinuationResult:
    solution: Solution
    amplitudes: list[float]
    gradient_sup_trace: list[float]
    failed_step: int | None = None

    @property
    def converged(self) -> bool:
        return self.failed_step is None


def continuation_solve(problem: DirichletProblem, config: SolverConfig | None = None) -> ContinuationResult:
    """Ramp the boundary data from 0 to its full value in equal increments.

    Step ``k`` solves with data ``(k/steps) * boundary_data``, warm-started
    from step ``k-1``.
    """
    config = SolverConfig() if config is None else config
    if np.all(problem.boundary_values == 0.0):
        zero = np.zeros(problem.mesh.shape)
        sol = _make_solution(problem, zero, 0.0, [], True, [0.0])
        return ContinuationResult(sol, [], [])
    u = np.zeros(problem.mesh.shape)
    iters, amps, trace, history = [], [], [], []
    steps = config.continuation_steps
    sup = 0.0
    for k in range(1, steps + 1):
        s = k / steps
        sub = problem.scaled(s)
        u, sup, it, ok, hist, msg = _newton(sub, u, config)
        iters.append(it)
        history.extend(hist)
        amps.append(s)
        sol_k = _make_solution(sub, u, sup, iters, ok, history, msg)
        trace.append(sol_k.gradient_sup)
        if not ok:
            log.warning("continuation step %d failed: %s", k, msg)
            return ContinuationResult(sol_k, amps, trace, failed_step=k)
    final = _make_solution(problem, u, sup, iters, True, history)
    return ContinuationResult(final, amps, trace)


def maximum_principle_check(solution: Solution) -> float:
    """min(min_u - min boundary, max boundary - max_u); >= -1e-12 expected."""
    bv = solution.problem.boundary_values
    return float(min(solution.min_u - np.min(bv), np.max(bv) - solution.max_u))


def annulus_problem(metric: ChartMetric, r1: float, R: float, t: float, n_r: int,
                    n_theta: int = 1) -> DirichletProblem:
    """Boundary values 0 on r = r1 and t on r = R."""
    mesh = polar_mesh(r1, R, n_r, n_theta)
    bd = np.zeros(mesh.shape)
    bd[-1, :] = t
    return DirichletProblem(metric, mesh, bd, symmetry=(n_theta == 1))


@dataclass(eq=False)
class FamilyMember:
    R: float
    u_at_2r1: float
    gradient_sup: float
    max_principle_slack: float
    solution: Solution
    iterations: list[int]


@dataclass(eq=False)
class FamilyReport:
    r1: float
    t: float
    members: list[FamilyMember]
    ordering_slack: list[float]     # min over common nodes of u_k - u_{k+1}
    converged: bool

    @property
    def values(self) -> list[float]:
        return [m.u_at_2r1 for m in self.members]


def annulus_family(metric: ChartMetric, r1: float, outer_radii, t: float,
                   config: SolverConfig | None = None, nodes_per_unit: int = 64,
                   n_theta: int = 1, threads: int = 1) -> FamilyReport:
    """Solve the annuli ``[r1, R_k]`` with data (0, t) and compare them.

    The radial spacing ``1/nodes_per_unit`` is shared, so when every
    ``R_k - r1`` is a multiple of it the meshes are nested and ``r = 2 r1``
    is a node.
    """
    config = SolverConfig() if config is None else config
    radii = [float(R) for R in outer_radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("outer radii must be strictly increasing")
    if radii[0] <= 2 * r1:
        raise ValueError("the evaluation circle r = 2 r1 must lie inside every annulus")

    def run(R):
        n_r = int(round((R - r1) * nodes_per_unit)) + 1
        prob = annulus_problem(metric, r1, R, t, n_r, n_theta)
        return continuation_solve(prob, config)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, radii))
    else:
        results = [run(R) for R in radii]

    members = []
    for R, res in zip(radii, results):
        sol = res.solution
        r = sol.u.mesh.axes[0]
        u_line = sol.u.values.mean(axis=1)
        val = float(np.interp(2 * r1, r, u_line))
        members.append(FamilyMember(R, val, sol.gradient_sup, maximum_principle_check(sol),
                                    sol, sol.newton_iterations_per_step))
    ordering = []
    for m, m_next in zip(members, members[1:]):
        r = m.solution.u.mesh.axes[0]
        u_k = m.solution.u.values.mean(axis=1)
        r_next = m_next.solution.u.mesh.axes[0]
        u_next = np.interp(r, r_next, m_next.solution.u.values.mean(axis=1))
        ordering.append(float(np.min(u_k - u_next)))
    converged = all(res.converged for res in results)
    return FamilyReport(r1, t, members, ordering, converged)
