from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import roots_jacobi

from minigraph.barrier import (SAFETY_MARGIN, BarrierError, boundary_gradient_constant, build_profile,
                               choose_r0, ode_residual, phi, phi_prime, phi_second, supersolution_check)
from minigraph.metric import CurvatureBounds, DomainError, flat_polar, hyperbolic_polar, radial_laplacian_bound

# frozen from a 30-digit tanh-sinh quadrature of the unsubstituted integral
PHI_2_R0_1_N_2 = 0.807819333968729011
DELTA0 = {(2, 0.5): 0.0632779069056178925, (2, 1.0): 0.126555813811235787,
          (3, 1.0): 0.0469974183904140384, (3, 0.2): 0.00939948367808280769,
          (4, 1.0): 0.0182402774149132590}
# roots of r coth r = 1.98 (n = 2) and 2 r coth r = 2.97 (n = 3), divided by 4
R0_HYPERBOLIC = {2: 0.472995072205822854, 3: 0.316615179064176935}


def _gauss_jacobi_phi(r, r0, n, order=80):
    """Independent route: Gauss-Jacobi with weight (1+x)^(-1/2) absorbs the endpoint singularity."""
    x, w = roots_jacobi(order, 0.0, -0.5)
    half = (r - r0) / 2.0
    t = r0 + half * (1.0 + x)
    smooth = np.sqrt(1.0 + x) / np.sqrt((t / r0) ** (2 * n) - 1.0)
    return float(half * np.sum(w * smooth))


def test_phi_prime_examples():
    for n in (1, 2, 5):
        assert phi_prime(2 ** (1 / (2 * n)), 1.0, n) == pytest.approx(1.0, rel=1e-14)
    assert phi_prime(2.0, 1.0, 2) == pytest.approx(1 / math.sqrt(15), rel=1e-15)
    assert phi_prime(1e6, 1.0, 2) < 1e-11
    with pytest.raises(DomainError):
        phi_prime(1.0, 1.0, 2)


def test_phi_against_frozen_and_independent_quadrature():
    assert phi(1.0, 1.0, 2) == 0.0
    assert phi(2.0, 1.0, 2) == pytest.approx(PHI_2_R0_1_N_2, abs=1e-12)
    assert abs(phi(2.0, 1.0, 2) - _gauss_jacobi_phi(2.0, 1.0, 2)) < 1e-9
    with pytest.raises(DomainError):
        phi(0.5, 1.0, 2)


@pytest.mark.parametrize("n,r0", sorted(DELTA0))
def test_delta0_frozen(n, r0):
    assert build_profile(r0, n).delta0 == pytest.approx(DELTA0[(n, r0)], abs=1e-12)


@given(st.integers(1, 6), st.floats(0.05, 5.0))
def test_phi_monotone(n, r0):
    a, b = phi(2 * r0, r0, n), phi(4 * r0, r0, n)
    assert b > a > 0


@pytest.mark.parametrize("n,r0", [(2, 1.0), (3, 0.2), (4, 0.7)])
def test_phi_prime_matches_numerical_derivative(n, r0):
    h = 1e-5 * r0
    for r in np.linspace(1.2 * r0, 10 * r0, 25):
        numeric = (phi(r + h, r0, n) - phi(r - h, r0, n)) / (2 * h)
        assert numeric == pytest.approx(phi_prime(r, r0, n), rel=1e-6, abs=1e-6)


def test_phi_second_matches_derivative_of_phi_prime():
    r0, n = 0.8, 3
    for r in (0.9, 1.2, 3.0):
        h = 1e-6
        numeric = (phi_prime(r + h, r0, n) - phi_prime(r - h, r0, n)) / (2 * h)
        assert phi_second(r, r0, n) == pytest.approx(numeric, rel=1e-6)


@pytest.mark.parametrize("n,r0,r", [(2, 1.0, 1.5), (3, 0.2, 0.5)])
def test_ode_residual_examples(n, r0, r):
    assert abs(ode_residual(r0, r, n)) <= 1e-12


def test_ode_residual_guard_near_neck():
    prof = build_profile(1.0, 2)
    with pytest.raises(DomainError):
        ode_residual(prof, 1.0 + 1e-7)
    assert abs(ode_residual(prof, 1.0 + 1e-6)) < 1e-6 * 1e3


@given(st.integers(2, 4), st.floats(0.1, 2.0), st.floats(1.01, 10.0))
def test_ode_residual_vanishes(n, r0, ratio):
    assert abs(ode_residual(r0, r0 * ratio, n)) <= 1e-12


def test_delta0_monotone_in_n_and_r0():
    for r0 in (0.2, 1.0):
        d = [build_profile(r0, n, samples=3).delta0 for n in (2, 3, 4, 5)]
        assert all(a > b for a, b in zip(d, d[1:]))
    for n in (2, 3):
        d = [build_profile(r0, n, samples=3).delta0 for r0 in (0.1, 0.3, 1.0)]
        assert all(a < b for a, b in zip(d, d[1:]))


def test_profile_table():
    prof = build_profile(0.5, 2, samples=51)
    assert prof.phi[0] == 0.0 and np.all(np.diff(prof.phi) > 0)
    assert prof.phi_prime[0] == np.inf
    assert prof.phi_2r0 == pytest.approx(phi(1.0, 0.5, 2), abs=1e-14)
    np.testing.assert_allclose(prof.w([1.0, 2.0]), [0.0, 2 * prof.delta0], atol=1e-14)


def test_choose_r0_flat_returns_cap():
    assert choose_r0(flat_polar(0.01, 10.0), None, None, 0.7) == 0.7


@pytest.mark.parametrize("n", [2, 3])
def test_choose_r0_hyperbolic_frozen_and_admissible(n):
    metric = hyperbolic_polar(0.01, 10.0, dim=n)
    r0 = choose_r0(metric, None, None, 1.0)
    assert r0 == pytest.approx(R0_HYPERBOLIC[n], rel=1e-10)
    assert r0 < R0_HYPERBOLIC[n]
    r = np.linspace(1e-3, 4 * r0, 5001)
    assert np.all(radial_laplacian_bound(n, 1.0, r) < (1 - SAFETY_MARGIN) * n / r)


def test_choose_r0_smaller_in_higher_dimension():
    assert R0_HYPERBOLIC[3] < R0_HYPERBOLIC[2]
    r2 = choose_r0(hyperbolic_polar(0.01, 10.0, dim=2), None, None, 1.0)
    r3 = choose_r0(hyperbolic_polar(0.01, 10.0, dim=3), None, None, 1.0)
    assert r3 < r2


def test_choose_r0_no_admissible_value():
    with pytest.raises(BarrierError):
        choose_r0(flat_polar(0.01, 1.0), CurvatureBounds(1.0, -1.0, False), None, 1.0, n=200)
    with pytest.raises(BarrierError):
        choose_r0(flat_polar(0.01, 1.0), None, None, 0.0)


def test_supersolution_flat_closed_form():
    metric = flat_polar(0.01, 10.0)
    prof = build_profile(0.5, 2)
    chk = supersolution_check(metric, prof)
    # exact ODE cancellation leaves Mw = -phi'/r
    np.testing.assert_allclose(chk.Mw, -phi_prime(chk.r, 0.5, 2) / chk.r, rtol=1e-12)
    assert chk.certified


@pytest.mark.parametrize("n", [2, 3])
def test_supersolution_hyperbolic_certified(n):
    metric = hyperbolic_polar(0.01, 10.0, dim=n)
    prof = build_profile(choose_r0(metric, None, None, 1.0), n)
    assert supersolution_check(metric, prof).min_margin > 0


def test_supersolution_negative_control():
    metric = hyperbolic_polar(0.01, 40.0)
    chk = supersolution_check(metric, build_profile(3.0, 2))
    assert chk.min_margin <= 0 and not chk.certified


def test_supersolution_rejects_shifted_centre():
    with pytest.raises(ValueError):
        supersolution_check(flat_polar(0.1, 5.0), build_profile(0.5, 2), p_center=[0.1, 0.0])


def test_boundary_gradient_constant():
    assert boundary_gradient_constant(build_profile(1.0, 2, samples=3)) == pytest.approx(1 / math.sqrt(15), rel=1e-15)
    assert boundary_gradient_constant(build_profile(1.0, 3, samples=3)) == pytest.approx(1 / math.sqrt(63), rel=1e-15)
    assert boundary_gradient_constant(build_profile(1.0, 30, samples=3)) < 1e-8
    prof = build_profile(0.4, 2, samples=3)
    assert boundary_gradient_constant(prof) == pytest.approx(phi_prime(0.8, 0.4, 2), rel=1e-14)
