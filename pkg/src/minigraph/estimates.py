"""Gradient estimates for minimal graphs and the Harnack/rigidity sweep."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import ScalarField, box_mesh, grid_derivatives
from .metric import ChartMetric, CurvatureBounds, DomainError, euclidean
from .solver import DirichletProblem, Solution, SolverConfig, newton_solve

__all__ = [
    "PreconditionError",
    "EstimateReport",
    "GradientMaxResult",
    "InteriorBoundResult",
    "psi",
    "alpha_from_bounds",
    "interior_bound_K",
    "interior_bound",
    "gradient_max_check",
    "interior_bound_check",
    "harnack_ratio",
    "RigidityRow",
    "RigidityReport",
    "rigidity_experiment",
    "cos_theta_data",
]


class PreconditionError(ValueError):
    """An estimate was requested outside its hypotheses."""


def psi(R: float, n: int, K0: float) -> float:
    """(n-1) sqrt(K0) R coth(sqrt(K0) R) + 1, equal to n when K0 = 0."""
    if R <= 0:
        raise DomainError("psi needs R > 0")
    if K0 < 0:
        raise DomainError("K0 must be nonnegative")
    if K0 == 0:
        return float(n)
    x = math.sqrt(K0) * R
    return (n - 1) * x / math.tanh(x) + 1.0


def alpha_from_bounds(bounds: CurvatureBounds) -> float:
    return math.sqrt(-bounds.ricci_lower) if bounds.ricci_lower < 0 else 0.0


def interior_bound_K(u_p: float, R: float, n: int, K0: float) -> float:
    return 64.0 * u_p ** 2 * psi(R, n, K0) / R ** 2 + 2.0


def interior_bound(u_p: float, R: float, n: int, K0: float) -> float:
    """Bound on W(p): (e^K - 1)/(e^{K/2} - 1) max{2/sqrt(3), 16 u(p)/R} = (e^{K/2} + 1) max{...}."""
    K = interior_bound_K(u_p, R, n, K0)
    base = max(2.0 / math.sqrt(3.0), 16.0 * u_p / R)
    half = K / 2.0
    if half > 700:
        return math.inf
    return (math.exp(half) + 1.0) * base


@dataclass
class GradientMaxResult:
    lhs: float
    rhs: float
    slack: float
    alpha: float


@dataclass
class InteriorBoundResult:
    W_p: float
    bound: float
    slack: float
    K: float
    psi: float
    u_p: float
    R: float

    @property
    def tightness(self) -> float:
        """bound / W(p)."""
        return self.bound / self.W_p


def _W_all_nodes(metric: ChartMetric, u: ScalarField) -> np.ndarray:
    du, _, _ = grid_derivatives(u)
    inv = np.linalg.inv(metric.sigma(u.mesh.coords()))
    return np.sqrt(1.0 + np.einsum("...i,...ij,...j->...", du, inv, du))


def gradient_max_check(solution: Solution | ScalarField, metric: ChartMetric | None = None,
                  bounds: CurvatureBounds | None = None) -> GradientMaxResult:
    """sup W <= sup e^{-alpha u} * sup_boundary (e^{alpha u} W)."""
    if isinstance(solution, Solution):
        u = solution.u
        metric = solution.problem.metric if metric is None else metric
    else:
        u = solution
    if metric is None:
        raise ValueError("a metric is required")
    bounds = metric.bounds if bounds is None else bounds
    alpha = alpha_from_bounds(bounds)
    W = _W_all_nodes(metric, u)
    bmask = u.mesh.boundary_mask
    lhs = float(np.max(W))
    rhs = float(np.max(np.exp(-alpha * u.values)) * np.max(np.exp(alpha * u.values[bmask]) * W[bmask]))
    return GradientMaxResult(lhs, rhs, rhs - lhs, alpha)


def _center_and_radius(metric: ChartMetric, mesh):
    node = mesh.center_node()
    if node is None:
        raise PreconditionError("the estimate needs a box mesh with a centre node")
    x = mesh.coords()
    dist = metric.distance_from_center(x)
    if dist[node] > 1e-12:
        raise PreconditionError("the centre node must coincide with the chart centre")
    half = min((ax[-1] - ax[0]) / 2.0 for ax in mesh.axes)
    centre = x[node]
    edge = centre.copy()
    edge[0] += half
    R_max = float(metric.distance_from_center(edge))
    return node, dist, R_max


def interior_bound_check(solution: Solution, R: float | None = None,
                bounds: CurvatureBounds | None = None) -> InteriorBoundResult:
    """Evaluate (e^{K/2} - 1) W(p) <= (e^K - 1) max{2/sqrt(3), 16 u(p)/R} at the chart centre p."""
    metric = solution.problem.metric
    bounds = metric.bounds if bounds is None else bounds
    node, dist, R_max = _center_and_radius(metric, solution.u.mesh)
    R = R_max if R is None else float(R)
    if R > R_max * (1 + 1e-12):
        raise PreconditionError("B_R(p) is not contained in the mesh")
    ball = dist <= R * (1 + 1e-12)
    if np.any(solution.u.values[ball] < 0):
        raise PreconditionError("the interior estimate needs u >= 0 on B_R(p)")
    W = _W_all_nodes(metric, solution.u)
    u_p = float(solution.u.values[node])
    K = interior_bound_K(u_p, R, metric.dim, bounds.K0)
    bound = interior_bound(u_p, R, metric.dim, bounds.K0)
    W_p = float(W[node])
    return InteriorBoundResult(W_p, bound, bound - W_p, K, psi(R, metric.dim, bounds.K0), u_p, R)


def harnack_ratio(u: ScalarField | Solution, metric: ChartMetric | None = None, R: float | None = None) -> float:
    """sup u / inf u over the half ball B_{R/2}(p) about the chart centre."""
    if isinstance(u, Solution):
        metric = u.problem.metric if metric is None else metric
        u = u.u
    _, dist, R_max = _center_and_radius(metric, u.mesh)
    R = R_max if R is None else float(R)
    half = u.values[dist <= R / 2 * (1 + 1e-12)]
    lo = float(np.min(half))
    if lo <= 0:
        raise PreconditionError("Harnack ratio needs u > 0 on the half ball")
    return float(np.max(half)) / lo


@dataclass
class EstimateReport:
    gradient_max_lhs: float
    gradient_max_rhs: float
    gradient_max_slack: float
    alpha_used: float
    interior_W_p: float | None = None
    interior_bound: float | None = None
    interior_slack: float | None = None
    K_used: float | None = None
    psi_used: float | None = None
    harnack_ratio: dict = field(default_factory=dict)

    @classmethod
    def evaluate(cls, solution: Solution, R: float | None = None) -> "EstimateReport":
        lem = gradient_max_check(solution)
        rep = cls(lem.lhs, lem.rhs, lem.slack, lem.alpha)
        if solution.u.mesh.center_node() is not None:
            try:
                th = interior_bound_check(solution, R)
            except PreconditionError:
                return rep
            rep.interior_W_p, rep.interior_bound, rep.interior_slack = th.W_p, th.bound, th.slack
            rep.K_used, rep.psi_used = th.K, th.psi
            if np.min(solution.u.values) > 0:
                rep.harnack_ratio = {repr(th.R): harnack_ratio(solution, R=th.R)}
        return rep


def cos_theta_data(amplitude: float, offset: float = 0.0):
    """Boundary function offset + amplitude (1 + cos theta) / 2 about the origin."""
    def fn(x, y):
        rr = np.hypot(x, y)
        c = np.where(rr > 0, x / np.where(rr > 0, rr, 1.0), 1.0)
        return offset + amplitude * 0.5 * (1.0 + c)
    return fn


@dataclass
class RigidityRow:
    R: float
    eps: float
    harnack_ratio: float
    C: float
    sup_ball: float


@dataclass
class RigidityReport:
    rows: list[RigidityRow]
    variation: dict           # eps -> max/min - 1 of the half-ball ratio across R
    C_variation: dict         # eps -> max/min - 1 of sup/eps across R
    converged: bool


def rigidity_experiment(radii=(4.0, 8.0, 16.0), epsilons=(0.1, 0.01), amplitude: float = 1.0,
                        nodes: int = 65, config: SolverConfig | None = None) -> RigidityReport:
    """Positive flat-disk solutions normalized to inf_{B_R} u = eps.

    Each disk is the inscribed ball of ``[-R, R]^2`` with boundary data
    ``amplitude (1 + cos theta)/2``; adding a constant keeps a solution a
    solution, so ``u = v - inf_{B_R} v + eps``.
    """
    config = SolverConfig() if config is None else config
    rows, ok = [], True
    for R in radii:
        box = [[-R, R], [-R, R]]
        metric = euclidean(2, box)
        mesh = box_mesh(box, (nodes, nodes))
        bd = ScalarField.from_function(mesh, cos_theta_data(amplitude)).values
        sol = newton_solve(DirichletProblem(metric, mesh, bd), config=config)
        ok &= sol.converged
        dist = metric.distance_from_center(mesh.coords())
        ball = dist <= R * (1 + 1e-12)
        v = sol.u.values
        base = float(np.min(v[ball]))
        for eps in epsilons:
            u = ScalarField(mesh, v - base + eps)
            ratio = harnack_ratio(u, metric, R)
            sup_ball = float(np.max(u.values[ball]))
            rows.append(RigidityRow(R, eps, ratio, sup_ball / eps, sup_ball))
    variation, c_var = {}, {}
    for eps in epsilons:
        rs = [r.harnack_ratio for r in rows if r.eps == eps]
        cs = [r.C for r in rows if r.eps == eps]
        variation[eps] = max(rs) / min(rs) - 1.0
        c_var[eps] = max(cs) / min(cs) - 1.0
    return RigidityReport(rows, variation, c_var, bool(ok))
