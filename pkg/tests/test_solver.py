from __future__ import annotations

import math

import numpy as np
import pytest

from minigraph.fields import ScalarField, box_mesh, polar_mesh
from minigraph.metric import euclidean, flat_polar, hyperbolic_disk_ball, hyperbolic_polar
from minigraph.solver import (DirichletProblem, SolverConfig, annulus_family, annulus_problem, assemble_jacobian,
                              assemble_residual, continuation_solve, maximum_principle_check, newton_solve,
                              solution_from_field)

UNIT = [[-1.0, 1.0], [-1.0, 1.0]]


def _box_problem(fn, n=17, metric=None):
    metric = euclidean(2, UNIT) if metric is None else metric
    mesh = box_mesh(metric.domain.bounds, (n, n))
    return DirichletProblem(metric, mesh, ScalarField.from_function(mesh, fn).values)


def _catenoid_error(n_r):
    metric = flat_polar(1.05, 4.0)
    mesh = polar_mesh(1.05, 4.0, n_r, 1)
    exact = np.arccosh(mesh.coords()[..., 0])
    sol = newton_solve(DirichletProblem(metric, mesh, exact, symmetry=True))
    assert sol.converged
    return float(np.max(np.abs(sol.u.values - exact)))


def test_residual_vanishes_on_constants_and_affine_functions():
    for fn in (lambda x, y: 0 * x + 3.0, lambda x, y: 0.4 * x - 1.3 * y + 0.5):
        prob = _box_problem(fn)
        assert np.max(np.abs(assemble_residual(prob, prob.boundary_data))) < 1e-13


def test_residual_is_zero_on_boundary_and_rejects_nan():
    prob = _box_problem(lambda x, y: x * x)
    u = prob.boundary_data.copy()
    assert np.all(assemble_residual(prob, u)[prob.mesh.boundary_mask] == 0)
    u[3, 3] = np.nan
    with pytest.raises(FloatingPointError):
        assemble_residual(prob, u)


def test_jacobian_matches_finite_differences():
    prob = _box_problem(lambda x, y: np.sin(x) * y, n=9)
    u = prob.initial_guess() + 0.05 * np.cos(3 * prob.mesh.coords()[..., 0])
    u[prob.mesh.boundary_mask] = prob.boundary_data[prob.mesh.boundary_mask]
    J, interior = assemble_jacobian(prob, u)
    J = J.toarray()
    h = 1e-6
    for col, k in enumerate(interior[:10]):
        up, um = u.copy(), u.copy()
        up.ravel()[k] += h
        um.ravel()[k] -= h
        fd = (assemble_residual(prob, up) - assemble_residual(prob, um)).ravel()[interior] / (2 * h)
        np.testing.assert_allclose(J[:, col], fd, atol=1e-6)


@pytest.mark.parametrize("metric", [euclidean(2, UNIT), hyperbolic_disk_ball(1.0)])
def test_linearization_at_zero_is_an_m_matrix(metric):
    prob = _box_problem(lambda x, y: 0.3 * x * y, n=9, metric=metric)
    J, _ = assemble_jacobian(prob, np.zeros(prob.mesh.shape))
    J = -J.toarray()
    off = J - np.diag(np.diag(J))
    assert np.all(np.diag(J) > 0) and np.all(off <= 1e-14)
    assert np.all(np.diag(J) >= -off.sum(axis=1) - 1e-12)
    assert np.all(np.linalg.eigvalsh(0.5 * (J + J.T)) > 0)


def test_constant_data_needs_at_most_one_iteration():
    sol = newton_solve(_box_problem(lambda x, y: 0 * x + 2.5))
    assert sol.converged and sol.newton_iterations_per_step[0] <= 1
    np.testing.assert_allclose(sol.u.values, 2.5, atol=1e-14)


def test_catenoid_converges_second_order():
    errs = [_catenoid_error(n) for n in (65, 129, 257)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9), (errs, orders)
    assert errs[-1] <= 5e-4


def test_continuation_zero_data_is_trivial():
    prob = _box_problem(lambda x, y: 0 * x)
    res = continuation_solve(prob)
    assert res.converged and res.amplitudes == [] and np.all(res.solution.u.values == 0)


def test_continuation_trace_and_agreement_with_newton():
    prob = _box_problem(lambda x, y: 1.5 * x * x - y, n=17)
    res = continuation_solve(prob, SolverConfig(continuation_steps=4))
    assert res.converged and res.amplitudes == [0.25, 0.5, 0.75, 1.0]
    assert len(res.gradient_sup_trace) == 4
    assert all(a < b for a, b in zip(res.gradient_sup_trace, res.gradient_sup_trace[1:]))
    direct = newton_solve(prob)
    assert np.max(np.abs(direct.u.values - res.solution.u.values)) < 1e-9


def test_annulus_solution_lies_strictly_between_boundary_values():
    prob = annulus_problem(hyperbolic_polar(1.0, 4.0), 1.0, 4.0, 0.3, 49)
    sol = continuation_solve(prob).solution
    inner = sol.u.values[1:-1, 0]
    assert np.all(inner > 0) and np.all(inner < 0.3)
    assert np.all(np.diff(sol.u.values[:, 0]) > 0)


def test_maximum_principle_on_trivial_cases():
    sol = newton_solve(_box_problem(lambda x, y: np.cos(2 * x) + y ** 3))
    assert maximum_principle_check(sol) >= -1e-12


def test_comparison_on_ordered_data():
    metric = flat_polar(1.0, 3.0)
    mesh = polar_mesh(1.0, 3.0, 25, 12)
    x = mesh.coords()
    low = 0.4 * (x[..., 0] - 1) * (1 + 0.3 * np.cos(x[..., 1]))
    high = low + 0.1 * (1 + np.sin(x[..., 1]) ** 2)
    s_low = newton_solve(DirichletProblem(metric, mesh, low))
    s_high = newton_solve(DirichletProblem(metric, mesh, high))
    assert np.min(s_high.u.values - s_low.u.values) >= -1e-12


def test_radial_reduction_matches_full_polar_grid():
    metric = hyperbolic_polar(1.0, 3.0)
    radial = continuation_solve(annulus_problem(metric, 1.0, 3.0, 0.5, 33)).solution
    full = continuation_solve(annulus_problem(metric, 1.0, 3.0, 0.5, 33, n_theta=8)).solution
    assert np.max(np.abs(full.u.values - radial.u.values)) < 1e-10


def test_hyperbolic_disk_solution_is_rotation_invariant_for_radial_data():
    metric = hyperbolic_disk_ball(1.0)
    c = metric.domain.bounds[0][1]
    mesh = box_mesh(metric.domain.bounds, (17, 17))
    x = mesh.coords()
    bd = 0.2 * (x[..., 0] ** 2 + x[..., 1] ** 2) / c ** 2
    sol = newton_solve(DirichletProblem(metric, mesh, bd))
    v = sol.u.values
    np.testing.assert_allclose(v, v.T, atol=1e-12)
    np.testing.assert_allclose(v, v[::-1, :], atol=1e-12)


def test_solver_config_validation():
    for kwargs in ({"newton_tol": 0}, {"damping": 1.0}, {"damping": 0.0}, {"continuation_steps": 0},
                   {"max_newton_iters": -1}, {"min_step": 0.0}):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)


def test_problem_validation():
    metric = euclidean(2, UNIT)
    with pytest.raises(ValueError):
        box_mesh(UNIT, (5, 17))
    mesh = box_mesh(UNIT, (9, 9))
    with pytest.raises(ValueError):
        DirichletProblem(metric, mesh, np.zeros((8, 9)))
    bad = np.zeros((9, 9))
    bad[0, 0] = np.inf
    with pytest.raises(ValueError):
        DirichletProblem(metric, mesh, bad)
    with pytest.raises(ValueError):
        DirichletProblem(metric, mesh, np.zeros((9, 9)), symmetry=True)


def test_nonconvergence_is_reported_not_raised():
    prob = _box_problem(lambda x, y: 4 * x * y)
    sol = newton_solve(prob, config=SolverConfig(max_newton_iters=1))
    assert not sol.converged and sol.message
    assert np.all(np.isfinite(sol.u.values))


def test_solution_from_field_round_trip():
    prob = _box_problem(lambda x, y: x * y)
    sol = newton_solve(prob)
    again = solution_from_field(prob, sol.u)
    assert again.converged and again.residual_norm == pytest.approx(sol.residual_norm, abs=1e-14)
    assert not solution_from_field(prob, prob.boundary_lift()).converged


def test_annulus_family_small_ordering_and_validation():
    metric = flat_polar(1.0, 8.0)
    fam = annulus_family(metric, 1.0, [4.0, 8.0], 0.1, nodes_per_unit=16)
    assert fam.converged
    assert fam.values[0] > fam.values[1] > 0
    assert all(s >= -1e-10 for s in fam.ordering_slack)
    with pytest.raises(ValueError):
        annulus_family(metric, 1.0, [8.0, 4.0], 0.1)
    with pytest.raises(ValueError):
        annulus_family(metric, 1.0, [2.0, 4.0], 0.1)


def test_flat_family_matches_logarithmic_profile():
    # thin flat annuli with small data are nearly harmonic: u(2 r1) ~ t log 2 / log(R / r1)
    metric = flat_polar(1.0, 8.0)
    t = 1e-3
    fam = annulus_family(metric, 1.0, [4.0, 8.0], t, nodes_per_unit=32)
    for m in fam.members:
        assert m.u_at_2r1 == pytest.approx(t * math.log(2) / math.log(m.R), rel=1e-3)
