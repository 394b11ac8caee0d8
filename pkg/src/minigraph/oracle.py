"""Independent checks on the Newton solver.

* direct minimization of the discrete area by gradient descent,
* a shooting solver for rotationally symmetric annulus problems,
* comparison of the divergence and non-divergence discretizations,
* complex-step first variation of the area against the assembled residual.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from . import discrete
from .fields import ScalarField
from .geometry import compute_quantities
from .metric import ChartMetric, RotationallySymmetricMetric
from .solver import DirichletProblem, assemble_residual

__all__ = [
    "ShootingError",
    "discrete_area",
    "area_difference",
    "first_variation_check",
    "DescentResult",
    "minimize_area",
    "RadialProfile",
    "radial_shoot",
    "form_equivalence_check",
    "catenoid_area",
]


class ShootingError(RuntimeError):
    """The flux bracket cannot reach the requested boundary value."""


def discrete_area(problem: DirichletProblem, u) -> float:
    """Midpoint-rule area  sum_cells W sqrt(sigma) dx  with the solver's corner gradients."""
    values = u.values if isinstance(u, ScalarField) else np.asarray(u)
    return discrete.area(problem.cells, values.ravel())


def area_difference(problem: DirichletProblem, u: np.ndarray, du: np.ndarray) -> float:
    """A(u + du) - A(u) without cancellation (W1 - W0 = (W1^2 - W0^2)/(W1 + W0))."""
    cd = problem.cells
    a0, b0 = discrete.corner_gradients(cd, u.ravel())
    da, db = discrete.corner_gradients(cd, du.ravel())
    total = 0.0
    for top in (0, 1):
        for right in (0, 1):
            a, b = a0[:, top], b0[:, right]
            ea, eb = da[:, top], db[:, right]
            W0 = np.sqrt(1.0 + cd.p * a * a + cd.q * b * b)
            W1 = np.sqrt(1.0 + cd.p * (a + ea) ** 2 + cd.q * (b + eb) ** 2)
            num = cd.p * ea * (2 * a + ea) + cd.q * eb * (2 * b + eb)
            total += np.sum(cd.weight * num / (W0 + W1))
    return float(total)


def first_variation_check(problem: DirichletProblem, u, step: float = 1e-30) -> float:
    """sup over interior nodes of |dA/du_k / vol_k + residual_k|, dA by complex step."""
    values = u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=float)
    base = values.ravel().astype(complex)
    cd = problem.cells
    res = assemble_residual(problem, values).ravel()
    worst = 0.0
    for k in np.flatnonzero(problem.mesh.interior_mask.ravel()):
        z = base.copy()
        z[k] += 1j * step
        dA = discrete.area(cd, z).imag / step
        worst = max(worst, abs(dA / cd.node_volume[k] + res[k]))
    return worst


@dataclass(eq=False)
class DescentResult:
    u: ScalarField
    iterations: int
    gradient_sup: float
    converged: bool
    area: float


def minimize_area(problem: DirichletProblem, tol: float = 1e-10, max_iter: int = 200_000,
                  u0=None) -> DescentResult:
    """Gradient descent with Armijo backtracking on the interior values.

    The search direction is the area gradient divided by the nodal volumes
    (the flux residual).  Trial steps use the Barzilai-Borwein length.
    """
    mask = problem.mesh.boundary_mask
    if u0 is None:
        u = np.full(problem.mesh.shape, float(np.mean(problem.boundary_data[mask])))
    else:
        u = np.array(u0.values if isinstance(u0, ScalarField) else u0, dtype=float)
    u[mask] = problem.boundary_data[mask]
    cd = problem.cells
    interior = problem.mesh.interior_mask.ravel()
    vol = cd.node_volume

    def grad(v):
        g = discrete.area_gradient(cd, v.ravel())
        g[~interior] = 0.0
        return g

    g = grad(u)
    d = -g / vol
    step = 1.0 / max(np.max(np.abs(d)), 1.0)
    prev = None
    it = 0
    while np.max(np.abs(g / vol)) > tol and it < max_iter:
        if prev is not None:
            s, y = prev
            sy = float(np.dot(s, y))
            if sy > 0:
                step = float(np.dot(s, s * vol)) / sy
        slope = float(np.dot(g, d))
        while True:
            du = (step * d).reshape(u.shape)
            if area_difference(problem, u, du) <= 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-20:
                break
        u_new = u + du
        g_new = grad(u_new)
        prev = ((u_new - u).ravel(), g_new - g)
        u, g = u_new, g_new
        d = -g / vol
        it += 1
    sup = float(np.max(np.abs(g / vol)))
    return DescentResult(ScalarField(problem.mesh, u), it, sup, sup <= tol, discrete_area(problem, u))


@dataclass(eq=False)
class RadialProfile:
    r: np.ndarray
    u: np.ndarray
    flux: float
    flux_along: np.ndarray
    conservation_error: float
    boundary_error: float


def _radial_weight(metric: RotationallySymmetricMetric):
    m = metric.dim - 1
    return lambda r: metric.warp.f(r) ** m


def radial_shoot(metric: RotationallySymmetricMetric, r1: float, R: float, t: float,
                 r_eval=None, tol: float = 1e-12) -> RadialProfile:
    """Solve (w(r) u'/W)' = 0, u(r1) = 0, u(R) = t, w = f^{n-1}, by shooting on the flux c.

    With the flux fixed, u' = c / sqrt(w^2 - c^2); the substitution
    r = r1 + s^2 keeps the integrand bounded when c approaches w(r1).
    """
    if not isinstance(metric, RotationallySymmetricMetric):
        raise TypeError("radial_shoot needs a rotationally symmetric metric")
    if t < 0:
        raise ValueError("t must be nonnegative")
    weight = _radial_weight(metric)
    r_eval = np.linspace(r1, R, 201) if r_eval is None else np.asarray(r_eval, dtype=float)
    if t == 0:
        z = np.zeros_like(r_eval)
        return RadialProfile(r_eval, z, 0.0, z.copy(), 0.0, 0.0)
    grid = np.linspace(r1, R, 2001)
    c_max = float(np.min(weight(grid)))

    def slope(r, c):
        w = weight(r)
        return c / np.sqrt(np.maximum((w - c) * (w + c), 0.0))

    def rise(a, b, c):
        if a == r1:
            # Gauss-Kronrod never samples s = 0, where the integrand is finite anyway
            g = lambda s: 2.0 * s * c / math.sqrt(max((weight(r1 + s * s) - c) * (weight(r1 + s * s) + c), 1e-300))
            val, _ = integrate.quad(g, 0.0, math.sqrt(b - r1), epsabs=1e-14, epsrel=1e-13, limit=400)
        else:
            val, _ = integrate.quad(lambda r: slope(r, c), a, b, epsabs=1e-14, epsrel=1e-13, limit=400)
        return val

    def height(c):
        knots = np.unique(np.concatenate([[r1], np.geomspace(r1, R, 9)[1:-1], [R]]))
        return sum(rise(a, b, c) for a, b in zip(knots[:-1], knots[1:]))

    c_hi = c_max * (1.0 - 1e-12)
    # near c_max quad reports roundoff; the final boundary_error measures what matters
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        top = height(c_hi)
        if top < t:
            raise ShootingError(f"boundary value t = {t} exceeds the largest reachable height {top:.6g}")
        c = optimize.brentq(lambda c: height(c) - t, 0.0, c_hi, xtol=1e-17, maxiter=500)
    u = np.zeros_like(r_eval)
    acc, last = 0.0, r1
    for k, r in enumerate(r_eval):
        if r > last:
            acc += rise(last, r, c)
            last = r
        u[k] = acc
    du = slope(r_eval, c)
    flux_along = weight(r_eval) * du / np.sqrt(1.0 + du * du)
    return RadialProfile(r_eval, u, c, flux_along, float(np.max(np.abs(flux_along - c))),
                         abs(height(c) - t))


def form_equivalence_check(metric: ChartMetric, u: ScalarField) -> float:
    """sup over interior nodes of |flux-form residual - (1/W) g^ij D_i D_j u|."""
    problem = DirichletProblem(metric, u.mesh, u.values)
    div = assemble_residual(problem, u)
    q = compute_quantities(metric, u)
    nondiv = q.dim * q.mean_curvature
    interior = u.mesh.interior_mask
    return float(np.max(np.abs(div - nondiv)[interior]))


def catenoid_area(a: float, b: float, theta_span: float = 2 * math.pi) -> float:
    """Area of the graph u = arcosh(r) over a <= r <= b (flat polar chart)."""
    # W r = r^2 / sqrt(r^2 - 1);  antiderivative (r sqrt(r^2-1) + arcosh r) / 2
    F = lambda r: 0.5 * (r * math.sqrt(r * r - 1.0) + math.acosh(r))
    return theta_span * (F(b) - F(a))
