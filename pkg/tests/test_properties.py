"""Property tests over randomly generated Dirichlet data and the regression corpus."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minigraph.estimates import gradient_max_check, psi, interior_bound, interior_bound_check
from minigraph.fields import box_mesh, polar_mesh
from minigraph.geometry import surface_laplacian
from minigraph.metric import euclidean, flat_polar, hyperbolic_disk_ball, hyperbolic_polar
from minigraph.oracle import discrete_area
from minigraph.solver import DirichletProblem, maximum_principle_check, newton_solve

from _corpus import smooth_random

UNIT = euclidean(2, [[-1.0, 1.0], [-1.0, 1.0]])
HYP_DISK = hyperbolic_disk_ball(1.0)
HYP_ANNULUS = hyperbolic_polar(0.5, 2.0)
METRICS = {"flat": UNIT, "hyperbolic-disk": HYP_DISK, "hyperbolic-annulus": HYP_ANNULUS}


def _mesh(name, n):
    metric = METRICS[name]
    if name == "hyperbolic-annulus":
        return polar_mesh(0.5, 2.0, n, 8)
    return box_mesh(metric.domain.bounds, (n, n))


@settings(max_examples=50)
@given(seed=st.integers(0, 2 ** 32 - 1), amplitude=st.floats(0.05, 2.0),
       name=st.sampled_from(sorted(METRICS)), n=st.sampled_from([9, 13]))
def test_maximum_principle_random_boundary(seed, amplitude, name, n):
    mesh = _mesh(name, n)
    prob = DirichletProblem(METRICS[name], mesh, smooth_random(mesh, seed, amplitude))
    sol = newton_solve(prob)
    assert sol.converged
    assert maximum_principle_check(sol) >= -1e-12


@settings(max_examples=20)
@given(seed=st.integers(0, 2 ** 32 - 1), lift=st.floats(0.0, 0.5), name=st.sampled_from(sorted(METRICS)))
def test_comparison_principle(seed, lift, name):
    mesh = _mesh(name, 9)
    low = smooth_random(mesh, seed, 0.8)
    bump = np.abs(smooth_random(mesh, seed + 1, lift)) if lift > 0 else np.zeros(mesh.shape)
    s_low = newton_solve(DirichletProblem(METRICS[name], mesh, low))
    s_high = newton_solve(DirichletProblem(METRICS[name], mesh, low + bump))
    assert np.min(s_high.u.values - s_low.u.values) >= -1e-10


@settings(max_examples=20)
@given(seed=st.integers(0, 2 ** 32 - 1), shift=st.floats(-3.0, 3.0))
def test_vertical_translation_invariance(seed, shift):
    mesh = box_mesh(UNIT.domain.bounds, (9, 9))
    data = smooth_random(mesh, seed)
    a = newton_solve(DirichletProblem(UNIT, mesh, data))
    b = newton_solve(DirichletProblem(UNIT, mesh, data + shift))
    assert np.max(np.abs(b.u.values - a.u.values - shift)) < 1e-9


@given(st.integers(2, 5), st.floats(0.1, 10.0), st.floats(0.0, 4.0), st.floats(0.0, 4.0))
def test_psi_increasing_in_K0(n, R, a, b):
    lo, hi = sorted((a, b))
    assert psi(R, n, lo) <= psi(R, n, hi) + 1e-12


@given(st.integers(2, 5), st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(0.01, 4.0))
def test_psi_increasing_in_R(n, a, b, K0):
    lo, hi = sorted((a, b))
    assert psi(lo, n, K0) <= psi(hi, n, K0) + 1e-12


@given(st.floats(0.0, 0.5), st.floats(0.5, 4.0), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_bound_increasing_in_curvature(u_p, R, a, b):
    lo, hi = sorted((a, b))
    assert interior_bound(u_p, R, 3, lo) <= interior_bound(u_p, R, 3, hi)


def test_corpus_size_and_convergence(corpus):
    assert len(corpus) >= 20
    assert all(sol.converged for _, sol in corpus)


def test_corpus_maximum_principle(corpus):
    for label, sol in corpus:
        assert maximum_principle_check(sol) >= -1e-12, label


def test_corpus_gradient_max_principle(corpus):
    for label, sol in corpus:
        assert gradient_max_check(sol).slack >= -1e-8, label


def test_corpus_interior_on_positive_solutions(corpus):
    checked = 0
    for label, sol in corpus:
        if sol.u.mesh.center_node() is None or np.min(sol.u.values) <= 0:
            continue
        assert interior_bound_check(sol).slack > 0, label
        checked += 1
    assert checked >= 5


def test_corpus_minimality(corpus):
    rng = np.random.default_rng(11)
    for label, sol in corpus:
        prob = sol.problem
        a0 = discrete_area(prob, sol.u)
        for candidate in (prob.initial_guess(), sol.u.values + 1e-2 * prob.mesh.interior_mask * rng.normal(size=prob.mesh.shape)):
            assert a0 <= discrete_area(prob, candidate) + 1e-9, label


def test_corpus_surface_laplacian_is_small(corpus):
    for label, sol in corpus:
        # the constant scales with third derivatives of u; refinement orders are tested separately
        lap = surface_laplacian(sol.problem.metric, sol.u, sol.u).values
        h = max(sol.u.mesh.spacing)
        interior = sol.u.mesh.interior_mask
        assert np.max(np.abs(lap[interior])) <= 200 * (h * h + 1e-10), label
