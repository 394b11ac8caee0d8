"""Riemannian metrics in a single global chart.

Every metric exposes ``sigma``, ``dsigma`` and ``d2sigma`` evaluated on
arrays of points with shape ``(..., n)``.  Index conventions::

    sigma[..., i, j]          = sigma_ij
    dsigma[..., i, j, k]      = d_k sigma_ij
    d2sigma[..., i, j, k, l]  = d_k d_l sigma_ij
    christoffel[..., k, i, j] = Gamma^k_ij

Polar kinds use coordinates ``(r, theta)`` about the chart centre, so the
radial coordinate is the geodesic distance to the centre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DomainError",
    "Domain",
    "CurvatureBounds",
    "Warp",
    "ChartMetric",
    "EuclideanMetric",
    "RotationallySymmetricMetric",
    "HyperbolicDiskMetric",
    "euclidean",
    "flat_polar",
    "hyperbolic_polar",
    "rotationally_symmetric",
    "hyperbolic_disk",
    "hyperbolic_disk_ball",
    "metric_from_config",
    "christoffel",
    "christoffel_fd",
    "christoffel_derivatives",
    "ricci_tensor",
    "ricci_quadratic",
    "covariant_hessian",
    "radial_laplacian_bound",
    "validate_curvature_bounds",
]


class DomainError(ValueError):
    """A point or parameter lies outside the admissible domain."""


@dataclass(frozen=True)
class Domain:
    """Coordinate box (``kind="box"``) or polar annulus (``kind="polar"``)."""

    kind: str
    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.kind not in ("box", "polar"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        for lo, hi in self.bounds:
            if not hi > lo:
                raise ValueError(f"empty interval [{lo}, {hi}]")
        if self.kind == "polar" and self.bounds[0][0] <= 0.0:
            raise ValueError("polar domains must exclude the origin (r_min > 0)")

    @classmethod
    def box(cls, bounds: Sequence[Sequence[float]]) -> "Domain":
        return cls("box", tuple((float(lo), float(hi)) for lo, hi in bounds))

    @classmethod
    def annulus(cls, r_min: float, r_max: float) -> "Domain":
        return cls("polar", ((float(r_min), float(r_max)),))

    def contains(self, x, tol: float = 1e-12) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "polar":
            lo, hi = self.bounds[0]
            r = x[..., 0]
            return (r >= lo - tol) & (r <= hi + tol)
        inside = np.ones(x.shape[:-1], dtype=bool)
        for k, (lo, hi) in enumerate(self.bounds):
            inside &= (x[..., k] >= lo - tol) & (x[..., k] <= hi + tol)
        return inside


@dataclass(frozen=True)
class CurvatureBounds:
    """Sectional lower bound ``-K0`` and Ricci lower bound on unit vectors."""

    K0: float
    ricci_lower: float
    ricci_nonnegative: bool = False

    def __post_init__(self):
        if self.K0 < 0:
            raise ValueError("K0 must be nonnegative")
        if self.ricci_nonnegative and self.ricci_lower < 0:
            raise ValueError("ricci_nonnegative requires ricci_lower >= 0")


@dataclass(frozen=True)
class Warp:
    """Warping function f(r) of ``dr^2 + f(r)^2 dtheta^2`` with two derivatives."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    d2f: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)

    @classmethod
    def flat(cls) -> "Warp":
        return cls("flat", lambda r: r, np.ones_like, np.zeros_like)

    @classmethod
    def hyperbolic(cls, k: float = 1.0) -> "Warp":
        return cls(
            "hyperbolic",
            lambda r: np.sinh(k * r) / k,
            lambda r: np.cosh(k * r),
            lambda r: k * np.sinh(k * r),
            {"k": k},
        )

    @classmethod
    def spherical(cls, k: float = 1.0) -> "Warp":
        return cls(
            "spherical",
            lambda r: np.sin(k * r) / k,
            lambda r: np.cos(k * r),
            lambda r: -k * np.sin(k * r),
            {"k": k},
        )


class ChartMetric:
    """Base class: a metric ``sigma_ij`` on one coordinate chart."""

    kind: str = "abstract"
    dim: int
    domain: Domain
    bounds: CurvatureBounds

    @property
    def chart_dim(self) -> int:
        return self.dim

    def check_domain(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.chart_dim:
            raise ValueError(f"expected points of dimension {self.chart_dim}, got {x.shape[-1]}")
        if not np.all(self.domain.contains(x)):
            raise DomainError(f"point(s) outside the {self.kind} chart domain {self.domain.bounds}")
        return x

    def sigma(self, x) -> np.ndarray:
        raise NotImplementedError

    def dsigma(self, x) -> np.ndarray:
        raise NotImplementedError

    def d2sigma(self, x) -> np.ndarray:
        raise NotImplementedError

    @property
    def is_diagonal(self) -> bool:
        return True

    def sqrt_det(self, x) -> np.ndarray:
        return np.sqrt(np.linalg.det(self.sigma(x)))

    def distance_from_center(self, x) -> np.ndarray:
        raise NotImplementedError(f"{self.kind} has no distinguished centre")

    def to_config(self) -> dict:
        raise NotImplementedError


class EuclideanMetric(ChartMetric):
    kind = "euclidean"

    def __init__(self, dim: int, domain: Domain, center=None):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if domain.kind != "box" or len(domain.bounds) != dim:
            raise ValueError("euclidean metric needs a box domain of matching dimension")
        self.dim = dim
        self.domain = domain
        if center is None:
            center = [0.5 * (lo + hi) for lo, hi in domain.bounds]
        self.center = np.asarray(center, dtype=float)
        self.bounds = CurvatureBounds(0.0, 0.0, True)

    def sigma(self, x):
        x = self.check_domain(x)
        return np.broadcast_to(np.eye(self.dim), x.shape[:-1] + (self.dim, self.dim)).copy()

    def dsigma(self, x):
        x = self.check_domain(x)
        return np.zeros(x.shape[:-1] + (self.dim,) * 3)

    def d2sigma(self, x):
        x = self.check_domain(x)
        return np.zeros(x.shape[:-1] + (self.dim,) * 4)

    def sqrt_det(self, x):
        x = self.check_domain(x)
        return np.ones(x.shape[:-1])

    def distance_from_center(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.center, axis=-1)

    def to_config(self):
        return {"kind": "euclidean", "dim": self.dim,
                "domain": {"box": [list(b) for b in self.domain.bounds]}}


class RotationallySymmetricMetric(ChartMetric):
    """``dr^2 + f(r)^2 g_{S^{n-1}}`` in polar coordinates about the centre.

    Pointwise chart data (sigma and derivatives) is available for
    ``dim == 2`` only; radial quantities work in every dimension.
    """

    kind = "rotationally_symmetric"

    def __init__(self, dim: int, warp: Warp, domain: Domain, bounds: CurvatureBounds | None = None,
                 kind: str | None = None):
        if dim < 2:
            raise ValueError("rotationally symmetric metrics need dim >= 2")
        if domain.kind != "polar":
            raise ValueError("rotationally symmetric metrics live on a polar annulus")
        self.dim = dim
        self.warp = warp
        self.domain = domain
        if kind is not None:
            self.kind = kind
        r = np.linspace(*domain.bounds[0], 257)
        if np.any(warp.f(r) <= 0):
            raise ValueError("warp f(r) must be positive on the domain")
        self.bounds = bounds if bounds is not None else _warp_bounds(warp, dim)

    @property
    def chart_dim(self) -> int:
        return 2

    def _require_2d(self):
        if self.dim != 2:
            raise NotImplementedError("pointwise polar chart data is only implemented for dim == 2")

    def sigma(self, x):
        self._require_2d()
        x = self.check_domain(x)
        f = self.warp.f(x[..., 0])
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = f * f
        return out

    def dsigma(self, x):
        self._require_2d()
        x = self.check_domain(x)
        r = x[..., 0]
        out = np.zeros(x.shape[:-1] + (2, 2, 2))
        out[..., 1, 1, 0] = 2.0 * self.warp.f(r) * self.warp.df(r)
        return out

    def d2sigma(self, x):
        self._require_2d()
        x = self.check_domain(x)
        r = x[..., 0]
        f, df, d2f = self.warp.f(r), self.warp.df(r), self.warp.d2f(r)
        out = np.zeros(x.shape[:-1] + (2, 2, 2, 2))
        out[..., 1, 1, 0, 0] = 2.0 * (df * df + f * d2f)
        return out

    def sqrt_det(self, x):
        self._require_2d()
        x = self.check_domain(x)
        return self.warp.f(x[..., 0])

    def distance_from_center(self, x):
        return np.asarray(x, dtype=float)[..., 0]

    def laplacian_of_distance(self, r) -> np.ndarray:
        """Delta r = (n-1) f'(r)/f(r)."""
        r = np.asarray(r, dtype=float)
        return (self.dim - 1) * self.warp.df(r) / self.warp.f(r)

    def sectional_curvatures(self, r) -> tuple[np.ndarray, np.ndarray]:
        """Radial (-f''/f) and tangential ((1-f'^2)/f^2) sectional curvatures."""
        r = np.asarray(r, dtype=float)
        f, df, d2f = self.warp.f(r), self.warp.df(r), self.warp.d2f(r)
        return -d2f / f, (1.0 - df * df) / (f * f)

    def to_config(self):
        cfg = {"kind": self.kind, "dim": self.dim, "domain": {"r": list(self.domain.bounds[0])}}
        if self.kind == "hyperbolic_polar":
            cfg["kappa"] = -self.warp.params["k"] ** 2
        else:
            cfg["warp"] = {"type": self.warp.name, **self.warp.params}
        return cfg


class HyperbolicDiskMetric(ChartMetric):
    """Poincare ball model of curvature ``kappa = -k^2`` on a box inside the unit ball.

    ``sigma = lambda^2 delta`` with ``lambda = 2 / (k (1 - |x|^2))``; the
    centre is the origin and ``d(x, 0) = (2/k) artanh |x|``.
    """

    kind = "hyperbolic_disk"

    def __init__(self, dim: int, kappa: float, domain: Domain):
        if kappa >= 0:
            raise ValueError("hyperbolic_disk needs kappa < 0")
        if domain.kind != "box" or len(domain.bounds) != dim:
            raise ValueError("hyperbolic_disk needs a box domain of matching dimension")
        corner = math.sqrt(sum(max(abs(lo), abs(hi)) ** 2 for lo, hi in domain.bounds))
        if corner >= 1.0:
            raise ValueError("hyperbolic_disk box must lie strictly inside the unit ball")
        self.dim = dim
        self.kappa = float(kappa)
        self.k = math.sqrt(-kappa)
        self.domain = domain
        self.bounds = CurvatureBounds(-self.kappa, (dim - 1) * self.kappa, False)

    def _lam2(self, s):
        return 4.0 / (self.k ** 2 * (1.0 - s) ** 2)

    def sigma(self, x):
        x = self.check_domain(x)
        s = np.sum(x * x, axis=-1)
        return self._lam2(s)[..., None, None] * np.eye(self.dim)

    def dsigma(self, x):
        x = self.check_domain(x)
        s = np.sum(x * x, axis=-1)
        dl = 16.0 * x / (self.k ** 2 * (1.0 - s)[..., None] ** 3)
        return np.eye(self.dim)[..., None] * dl[..., None, None, :]

    def d2sigma(self, x):
        x = self.check_domain(x)
        s = np.sum(x * x, axis=-1)[..., None, None]
        n = self.dim
        d2l = 16.0 / self.k ** 2 * (np.eye(n) / (1.0 - s) ** 3
                                    + 6.0 * x[..., :, None] * x[..., None, :] / (1.0 - s) ** 4)
        return np.eye(n)[..., None, None] * d2l[..., None, None, :, :]

    def sqrt_det(self, x):
        x = self.check_domain(x)
        s = np.sum(x * x, axis=-1)
        return self._lam2(s) ** (self.dim / 2.0)

    def distance_from_center(self, x):
        rho = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        return 2.0 / self.k * np.arctanh(rho)

    def chart_radius(self, R: float) -> float:
        """Euclidean radius of the geodesic ball of radius ``R`` about the origin."""
        return math.tanh(self.k * R / 2.0)

    def to_config(self):
        return {"kind": "hyperbolic_disk", "dim": self.dim, "kappa": self.kappa,
                "domain": {"box": [list(b) for b in self.domain.bounds]}}


def _warp_bounds(warp: Warp, dim: int) -> CurvatureBounds:
    if warp.name == "flat":
        return CurvatureBounds(0.0, 0.0, True)
    if warp.name == "hyperbolic":
        k2 = warp.params["k"] ** 2
        return CurvatureBounds(k2, -(dim - 1) * k2, False)
    if warp.name == "spherical":
        k2 = warp.params["k"] ** 2
        return CurvatureBounds(0.0, (dim - 1) * k2, True)
    raise ValueError("custom warps must supply explicit CurvatureBounds")


# -- factories ----------------------------------------------------------------

def euclidean(dim: int, box: Sequence[Sequence[float]], center=None) -> EuclideanMetric:
    return EuclideanMetric(dim, Domain.box(box), center)


def flat_polar(r_min: float, r_max: float, dim: int = 2) -> RotationallySymmetricMetric:
    return RotationallySymmetricMetric(dim, Warp.flat(), Domain.annulus(r_min, r_max))


def hyperbolic_polar(r_min: float, r_max: float, kappa: float = -1.0, dim: int = 2) -> RotationallySymmetricMetric:
    if kappa >= 0:
        raise ValueError("hyperbolic_polar needs kappa < 0")
    return RotationallySymmetricMetric(dim, Warp.hyperbolic(math.sqrt(-kappa)),
                                       Domain.annulus(r_min, r_max), kind="hyperbolic_polar")


def rotationally_symmetric(warp: Warp, r_min: float, r_max: float, dim: int = 2,
                           bounds: CurvatureBounds | None = None) -> RotationallySymmetricMetric:
    return RotationallySymmetricMetric(dim, warp, Domain.annulus(r_min, r_max), bounds)


def hyperbolic_disk(box: Sequence[Sequence[float]], kappa: float = -1.0, dim: int | None = None) -> HyperbolicDiskMetric:
    dim = len(box) if dim is None else dim
    return HyperbolicDiskMetric(dim, kappa, Domain.box(box))


def hyperbolic_disk_ball(R: float, kappa: float = -1.0, dim: int = 2) -> HyperbolicDiskMetric:
    """Poincare chart on the smallest box containing the geodesic ball ``B_R(0)``."""
    c = math.tanh(math.sqrt(-kappa) * R / 2.0)
    return hyperbolic_disk([[-c, c]] * dim, kappa, dim)


def metric_from_config(block: dict) -> ChartMetric:
    """Build a metric from a JSON metric block (already schema-checked)."""
    kind = block["kind"]
    dim = int(block.get("dim", 2))
    dom = block["domain"]
    if kind == "euclidean":
        return euclidean(dim, dom["box"], block.get("center"))
    if kind == "hyperbolic_polar":
        return hyperbolic_polar(*dom["r"], kappa=float(block.get("kappa", -1.0)), dim=dim)
    if kind == "rotationally_symmetric":
        w = block.get("warp", {"type": "flat"})
        if w["type"] == "flat":
            warp = Warp.flat()
        elif w["type"] == "hyperbolic":
            warp = Warp.hyperbolic(float(w.get("k", 1.0)))
        elif w["type"] == "spherical":
            warp = Warp.spherical(float(w.get("k", 1.0)))
        else:
            raise ValueError(f"unknown warp type {w['type']!r}")
        return rotationally_symmetric(warp, *dom["r"], dim=dim)
    if kind == "hyperbolic_disk":
        return hyperbolic_disk(dom["box"], float(block.get("kappa", -1.0)), dim)
    raise ValueError(f"unknown metric kind {kind!r}")


# -- connection and curvature -------------------------------------------------

def _christoffel_from(sig, dsig):
    inv = np.linalg.inv(sig)
    # lower[..., l, i, j] = d_i sigma_jl + d_j sigma_il - d_l sigma_ij
    lower = (np.einsum("...jli->...lij", dsig) + np.einsum("...ilj->...lij", dsig)
             - np.einsum("...ijl->...lij", dsig))
    return 0.5 * np.einsum("...kl,...lij->...kij", inv, lower)


def christoffel(metric: ChartMetric, x) -> np.ndarray:
    """Gamma^k_ij from the analytic metric derivatives."""
    return _christoffel_from(metric.sigma(x), metric.dsigma(x))


def christoffel_fd(metric: ChartMetric, x, h: float = 1e-4) -> np.ndarray:
    """Gamma^k_ij with d sigma replaced by central differences of sigma."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    dsig = np.zeros(x.shape[:-1] + (n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        dsig[..., k] = (metric.sigma(x + e) - metric.sigma(x - e)) / (2 * h)
    return _christoffel_from(metric.sigma(x), dsig)


def christoffel_derivatives(metric: ChartMetric, x) -> np.ndarray:
    """d_m Gamma^k_ij as ``[..., k, i, j, m]``."""
    sig, dsig, d2sig = metric.sigma(x), metric.dsigma(x), metric.d2sigma(x)
    inv = np.linalg.inv(sig)
    dinv = -np.einsum("...ka,...abm,...bl->...klm", inv, dsig, inv)
    lower = (np.einsum("...jli->...lij", dsig) + np.einsum("...ilj->...lij", dsig)
             - np.einsum("...ijl->...lij", dsig))
    dlower = (np.einsum("...jlim->...lijm", d2sig) + np.einsum("...iljm->...lijm", d2sig)
              - np.einsum("...ijlm->...lijm", d2sig))
    return 0.5 * (np.einsum("...klm,...lij->...kijm", dinv, lower)
                  + np.einsum("...kl,...lijm->...kijm", inv, dlower))


def ricci_tensor(metric: ChartMetric, x) -> np.ndarray:
    """Ric_ij = d_k Gamma^k_ij - d_j Gamma^k_ik + Gamma^k_kl Gamma^l_ij - Gamma^k_jl Gamma^l_ik."""
    gam = christoffel(metric, x)
    dgam = christoffel_derivatives(metric, x)
    term1 = np.einsum("...kijk->...ij", dgam)
    term2 = np.einsum("...kikj->...ij", dgam)
    term3 = np.einsum("...kkl,...lij->...ij", gam, gam)
    term4 = np.einsum("...kjl,...lik->...ij", gam, gam)
    ric = term1 - term2 + term3 - term4
    return 0.5 * (ric + np.swapaxes(ric, -1, -2))


def ricci_quadratic(metric: ChartMetric, x, v, tol: float = 1e-8) -> np.ndarray:
    """Ric^M(v, v) for a sigma-unit vector ``v``."""
    v = np.asarray(v, dtype=float)
    sig = metric.sigma(x)
    norm2 = np.einsum("...i,...ij,...j->...", v, sig, v)
    if np.any(np.abs(norm2 - 1.0) > tol):
        raise ValueError("ricci_quadratic expects a unit vector in the metric")
    return np.einsum("...i,...ij,...j->...", v, ricci_tensor(metric, x), v)


def covariant_hessian(metric: ChartMetric, field, node=None):
    """D_i D_j u = d_i d_j u - Gamma^k_ij d_k u on a grid field.

    Returns ``(hess, one_sided)``; ``one_sided`` flags nodes where the
    boundary fallback stencil was used.  With ``node`` given, returns the
    matrix at that node and its flag.
    """
    from .fields import grid_derivatives

    du, d2u, one_sided = grid_derivatives(field)
    gam = christoffel(metric, field.mesh.coords())
    hess = d2u - np.einsum("...kij,...k->...ij", gam, du)
    hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
    if node is None:
        return hess, one_sided
    return hess[tuple(node)], bool(one_sided[tuple(node)])


def radial_laplacian_bound(n: int, K0: float, r) -> np.ndarray | float:
    """Upper bound for Delta r under sectional curvature >= -K0."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise DomainError("radial_laplacian_bound needs r > 0")
    if K0 < 0:
        raise DomainError("K0 must be nonnegative")
    if K0 == 0:
        out = (n - 1) / r_arr
    else:
        k = math.sqrt(K0)
        out = (n - 1) * k / np.tanh(k * r_arr)
    return float(out) if np.ndim(out) == 0 else out


def validate_curvature_bounds(metric: ChartMetric, bounds: CurvatureBounds | None = None,
                              samples: int = 64, tol: float = 1e-8) -> bool:
    """Check stored bounds against sampled curvature of the metric."""
    bounds = metric.bounds if bounds is None else bounds
    if isinstance(metric, RotationallySymmetricMetric):
        r = np.linspace(*metric.domain.bounds[0], samples)
        k_rad, k_tan = metric.sectional_curvatures(r)
        if metric.dim == 2:
            sect = k_rad
            ric = k_rad
        else:
            sect = np.minimum(k_rad, k_tan)
            ric = np.minimum(k_rad * (metric.dim - 1), k_rad + (metric.dim - 2) * k_tan)
        return bool(np.all(sect >= -bounds.K0 - tol) and np.all(ric >= bounds.ricci_lower - tol))
    if isinstance(metric, EuclideanMetric):
        return bounds.K0 >= 0 and bounds.ricci_lower <= tol
    if isinstance(metric, HyperbolicDiskMetric):
        rng = np.random.default_rng(0)
        lo = np.array([b[0] for b in metric.domain.bounds])
        hi = np.array([b[1] for b in metric.domain.bounds])
        x = lo + (hi - lo) * rng.random((samples, metric.dim))
        ric = ricci_tensor(metric, x)
        sig = metric.sigma(x)
        lam_min = np.min(np.linalg.eigvals(np.linalg.solve(sig, ric)).real, axis=-1)
        return bool(np.all(lam_min >= bounds.ricci_lower - 1e-6) and -metric.kappa <= bounds.K0 + tol)
    raise TypeError(f"cannot validate bounds for {type(metric).__name__}")
