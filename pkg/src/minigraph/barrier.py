"""Catenoid-type supersolution ``w = phi(r) - phi(2 r0)`` on the annulus 2r0 <= r <= 4r0.

``phi`` is the height of the upper half of an (n+1)-dimensional catenoid
with neck radius ``r0``:

    phi(r) = int_{r0}^{r} dt / sqrt((t/r0)^{2n} - 1),

so ``phi'`` has the closed form ``((r/r0)^{2n} - 1)^{-1/2}``.  The endpoint
singularity at ``t = r0`` is removed with ``t = r0 (1 + s^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .metric import ChartMetric, CurvatureBounds, DomainError, RotationallySymmetricMetric, radial_laplacian_bound

__all__ = [
    "BarrierError",
    "BarrierProfile",
    "BarrierCheck",
    "phi_prime",
    "phi_second",
    "phi",
    "ode_residual",
    "build_profile",
    "choose_r0",
    "supersolution_check",
    "boundary_gradient_constant",
    "SAFETY_MARGIN",
]

SAFETY_MARGIN = 0.01
QUAD_EPSABS = 1e-13


class BarrierError(RuntimeError):
    """No admissible barrier could be constructed."""


def phi_prime(r, r0: float, n: int):
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= r0):
        raise DomainError("phi' is only finite for r > r0")
    q = (r_arr / r0) ** (2 * n)
    out = 1.0 / np.sqrt(q - 1.0)
    return float(out) if np.ndim(out) == 0 else out


def phi_second(r, r0: float, n: int):
    """phi''(r) = -n q / (r (q - 1)^{3/2}),  q = (r/r0)^{2n}."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= r0):
        raise DomainError("phi'' is only finite for r > r0")
    q = (r_arr / r0) ** (2 * n)
    out = -n * q / (r_arr * (q - 1.0) ** 1.5)
    return float(out) if np.ndim(out) == 0 else out


def _integrand(s, r0, n):
    # dt / sqrt((t/r0)^{2n} - 1) with t = r0 (1 + s^2):  2 r0 / sqrt(((1+s^2)^{2n} - 1) / s^2)
    s = np.asarray(s, dtype=float)
    small = s < 1e-150
    s_safe = np.where(small, 1.0, s)
    ratio = np.expm1(2 * n * np.log1p(s_safe * s_safe)) / (s_safe * s_safe)
    ratio = np.where(small, 2.0 * n, ratio)
    return 2.0 * r0 / np.sqrt(ratio)


def phi(r, r0: float, n: int) -> float:
    """phi(r) by adaptive quadrature of the desingularized integrand."""
    r = float(r)
    if r < r0:
        raise DomainError("phi is defined for r >= r0")
    if r == r0:
        return 0.0
    upper = math.sqrt(r / r0 - 1.0)
    val, err = integrate.quad(_integrand, 0.0, upper, args=(r0, n),
                              epsabs=QUAD_EPSABS, epsrel=1e-13, limit=200)
    if err > 1e-10:
        raise ArithmeticError(f"quadrature error estimate {err:.1e} exceeds 1e-10")
    return float(val)


def ode_residual(profile_or_r0, r, n: int | None = None):
    """phi''/(1 + phi'^2) + (n/r) phi' with the analytic derivatives."""
    if isinstance(profile_or_r0, BarrierProfile):
        r0, n = profile_or_r0.r0, profile_or_r0.n
    else:
        r0 = float(profile_or_r0)
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < r0 * (1 + 1e-6)):
        raise DomainError("ode_residual is reported only for r >= r0 (1 + 1e-6)")
    p1 = phi_prime(r_arr, r0, n)
    p2 = phi_second(r_arr, r0, n)
    return p2 / (1.0 + p1 * p1) + n / r_arr * p1


@dataclass(frozen=True, eq=False)
class BarrierProfile:
    r0: float
    n: int
    r: np.ndarray
    phi: np.ndarray
    phi_prime: np.ndarray
    delta0: float

    @property
    def phi_2r0(self) -> float:
        return float(np.interp(2 * self.r0, self.r, self.phi))

    def w(self, r):
        """Barrier height phi(r) - phi(2 r0)."""
        return np.array([phi(x, self.r0, self.n) for x in np.atleast_1d(r)]) - self.phi_2r0


def build_profile(r0: float, n: int, r_max: float | None = None, samples: int = 201) -> BarrierProfile:
    """Tabulate phi and phi' on [r0, r_max] (default 4 r0)."""
    if r0 <= 0 or n < 1:
        raise ValueError("need r0 > 0 and n >= 1")
    r_max = 4 * r0 if r_max is None else float(r_max)
    r = np.linspace(r0, r_max, samples)
    r = np.union1d(r, [2 * r0, 4 * r0]) if r_max >= 4 * r0 else r
    vals = np.array([phi(x, r0, n) for x in r])
    dphi = np.full_like(r, np.inf)
    dphi[1:] = phi_prime(r[1:], r0, n)
    delta0 = 0.5 * (phi(4 * r0, r0, n) - phi(2 * r0, r0, n))
    return BarrierProfile(r0, n, r, vals, dphi, delta0)


def choose_r0(metric: ChartMetric, bounds: CurvatureBounds | None, p_center=None,
              upper_cap: float = 1.0, n: int | None = None) -> float:
    """Largest r0 <= upper_cap with Delta r bound <= (1 - margin) n / r on (0, 4 r0].

    ``r * radial_laplacian_bound(r)`` is nondecreasing, so the condition only
    needs checking at ``r = 4 r0``.
    """
    bounds = metric.bounds if bounds is None else bounds
    n = metric.dim if n is None else n
    if upper_cap <= 0:
        raise BarrierError("upper_cap must be positive")
    target = (1.0 - SAFETY_MARGIN) * n

    def excess(r):
        return r * radial_laplacian_bound(n, bounds.K0, r) - target

    if excess(1e-12) >= 0:
        raise BarrierError(f"no admissible r0: (n-1) >= (1 - margin) n for n = {n}")
    if excess(4 * upper_cap) < 0:
        return float(upper_cap)
    r_star = optimize.brentq(excess, 1e-12, 4 * upper_cap, xtol=1e-15, rtol=1e-14)
    # stay strictly on the admissible side of the root
    return float(np.nextafter(r_star / 4, 0.0) * (1 - 1e-12))


@dataclass(eq=False)
class BarrierCheck:
    min_margin: float
    r: np.ndarray
    Mw: np.ndarray
    laplacian_r: np.ndarray

    @property
    def certified(self) -> bool:
        return self.min_margin > 0


def supersolution_check(metric: RotationallySymmetricMetric, profile: BarrierProfile,
                        p_center=None, samples: int = 2001) -> BarrierCheck:
    """Sweep Mw = phi' Delta r + phi''/(1 + phi'^2) over 2 r0 <= r <= 4 r0.

    A positive ``min_margin = min(-Mw)`` certifies ``Mw < 0`` on the annulus.
    """
    if not isinstance(metric, RotationallySymmetricMetric):
        raise TypeError("supersolution_check needs a rotationally symmetric metric")
    if p_center is not None and np.any(np.asarray(p_center, dtype=float) != 0):
        raise ValueError("the barrier must be centred at the chart origin")
    if metric.dim != profile.n:
        raise ValueError("profile dimension must match the metric dimension")
    r = np.linspace(2 * profile.r0, 4 * profile.r0, samples)
    lap = metric.laplacian_of_distance(r)
    p1 = phi_prime(r, profile.r0, profile.n)
    p2 = phi_second(r, profile.r0, profile.n)
    Mw = p1 * lap + p2 / (1.0 + p1 * p1)
    return BarrierCheck(float(np.min(-Mw)), r, Mw, lap)


def boundary_gradient_constant(profile: BarrierProfile) -> float:
    """C2 = phi'(2 r0) = (2^{2n} - 1)^{-1/2}."""
    return 1.0 / math.sqrt(2.0 ** (2 * profile.n) - 1.0)
