"""Geometry of a graph ``{(x, u(x))}`` in ``M x R`` from grid samples of ``u``.

All quantities reuse one discrete gradient, so the algebraic relations
between ``W``, ``g_ij``, ``g^ij`` and ``det g`` hold to rounding; only the
differential identities (Jacobi equation, stability identity) carry
truncation error.  Residual fields are meaningful on the deep interior
(two nodes away from any non-periodic edge) and are zero elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ScalarField, grid_derivatives
from .metric import ChartMetric, christoffel, ricci_tensor

__all__ = [
    "GeometryError",
    "GeometricQuantities",
    "compute_quantities",
    "surface_laplacian",
    "jacobi_residual",
    "stability_residual",
    "L_operator",
    "det_identity_check",
    "inverse_identity_check",
    "non_divergence_operator",
]


class GeometryError(RuntimeError):
    pass


@dataclass(eq=False)
class GeometricQuantities:
    grad_u: np.ndarray          # covariant u_i, (..., 2)
    grad_u_up: np.ndarray       # u^i = sigma^ij u_j
    W: np.ndarray
    normal: np.ndarray          # (..., 3) coordinate components of N
    induced: np.ndarray         # g_ij
    induced_inv: np.ndarray     # g^ij
    sff: np.ndarray             # b_ij
    hessian: np.ndarray         # D_i D_j u
    mean_curvature: np.ndarray  # H (with nH = g^ij b_ij)
    norm_A_sq: np.ndarray
    angle: np.ndarray           # 1/W
    sigma: np.ndarray
    sigma_inv: np.ndarray
    christoffel: np.ndarray
    ric_term: np.ndarray        # (1 - W^-2) Ric(gamma, gamma) = Ric(grad u, grad u) / W^2
    one_sided: np.ndarray
    dim: int = 2


def compute_quantities(metric: ChartMetric, u: ScalarField) -> GeometricQuantities:
    x = u.mesh.coords()
    du, d2u, one_sided = grid_derivatives(u)
    sig = metric.sigma(x)
    if np.any(np.linalg.eigvalsh(sig)[..., 0] <= 0):
        raise GeometryError("metric is degenerate at some node")
    inv = np.linalg.inv(sig)
    gam = christoffel(metric, x)
    up = np.einsum("...ij,...j->...i", inv, du)
    W = np.sqrt(1.0 + np.einsum("...i,...i->...", du, up))
    hess = d2u - np.einsum("...kij,...k->...ij", gam, du)
    hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
    g = sig + du[..., :, None] * du[..., None, :]
    ginv = inv - up[..., :, None] * up[..., None, :] / (W * W)[..., None, None]
    b = hess / W[..., None, None]
    n = du.shape[-1]
    nH = np.einsum("...ij,...ij->...", ginv, b)
    normA = np.einsum("...ik,...jl,...ij,...kl->...", ginv, ginv, b, b)
    normal = np.concatenate([-up, np.ones(W.shape + (1,))], axis=-1) / W[..., None]
    ric = ricci_tensor(metric, x)
    ric_term = np.einsum("...i,...ij,...j->...", up, ric, up) / (W * W)
    return GeometricQuantities(
        grad_u=du, grad_u_up=up, W=W, normal=normal, induced=g, induced_inv=ginv,
        sff=b, hessian=hess, mean_curvature=nH / n, norm_A_sq=normA, angle=1.0 / W,
        sigma=sig, sigma_inv=inv, christoffel=gam, ric_term=ric_term,
        one_sided=one_sided, dim=n,
    )


def _surface_hessian_trace(q: GeometricQuantities, mesh, values):
    df, d2f, _ = grid_derivatives(values, mesh)
    cov = d2f - np.einsum("...kij,...k->...ij", q.christoffel, df)
    return np.einsum("...ij,...ij->...", q.induced_inv, cov), df


def _check_mesh(u: ScalarField, f: ScalarField):
    if not u.mesh.same_as(f.mesh):
        raise ValueError("fields live on different meshes")


def _deep(mesh, arr):
    out = np.where(mesh.deep_interior_mask(2), arr, 0.0)
    return ScalarField(mesh, out)


def surface_laplacian(metric: ChartMetric, u: ScalarField, f: ScalarField,
                      q: GeometricQuantities | None = None) -> ScalarField:
    """Delta^S f = g^ij D_i D_j f with the induced metric of graph(u)."""
    _check_mesh(u, f)
    q = compute_quantities(metric, u) if q is None else q
    lap, _ = _surface_hessian_trace(q, u.mesh, f.values)
    return ScalarField(u.mesh, lap)


def jacobi_residual(metric: ChartMetric, u: ScalarField,
                    q: GeometricQuantities | None = None) -> ScalarField:
    """Delta^S(W^-1) + (|A|^2 + Ric~(N,N)) W^-1, zero outside the deep interior."""
    q = compute_quantities(metric, u) if q is None else q
    lap, _ = _surface_hessian_trace(q, u.mesh, q.angle)
    res = lap + (q.norm_A_sq + q.ric_term) * q.angle
    return _deep(u.mesh, res)


def stability_residual(metric: ChartMetric, u: ScalarField,
                       q: GeometricQuantities | None = None) -> ScalarField:
    """Delta^S W - 2 W^-1 |grad^S W|^2 - W |A|^2 - W (1 - W^-2) Ric(gamma, gamma)."""
    q = compute_quantities(metric, u) if q is None else q
    lap, dW = _surface_hessian_trace(q, u.mesh, q.W)
    gradS2 = np.einsum("...ij,...i,...j->...", q.induced_inv, dW, dW)
    res = lap - 2.0 * gradS2 / q.W - q.W * q.norm_A_sq - q.W * q.ric_term
    return _deep(u.mesh, res)


def L_operator(metric: ChartMetric, u: ScalarField, eta: ScalarField, alpha: float | None = None,
               q: GeometricQuantities | None = None):
    """Lh for h = eta W, together with the closed-form right-hand side.

    Returns ``(Lh, rhs, rhs_exp)`` where ``rhs = W (Delta^S eta + eta (|A|^2 +
    (1-W^-2) Ric))``.  When ``alpha`` is given (``eta = exp(alpha u)``),
    ``rhs_exp = h (|A|^2 + (1-W^-2)(alpha^2 + Ric))``; otherwise ``None``.
    All three are zeroed outside the deep interior.
    """
    _check_mesh(u, eta)
    if np.any(eta.values < 0):
        raise ValueError("eta must be nonnegative")
    q = compute_quantities(metric, u) if q is None else q
    mesh = u.mesh
    h = eta.values * q.W
    lap_h, dh = _surface_hessian_trace(q, mesh, h)
    dW, _, _ = grid_derivatives(q.W, mesh)
    cross = np.einsum("...ij,...i,...j->...", q.induced_inv, dW, dh)
    Lh = lap_h - 2.0 * cross / q.W
    lap_eta, _ = _surface_hessian_trace(q, mesh, eta.values)
    rhs = q.W * (lap_eta + eta.values * (q.norm_A_sq + q.ric_term))
    rhs_exp = None
    if alpha is not None:
        one_minus = 1.0 - 1.0 / (q.W * q.W)
        rhs_exp = _deep(mesh, h * (q.norm_A_sq + one_minus * alpha ** 2 + q.ric_term))
    return _deep(mesh, Lh), _deep(mesh, rhs), rhs_exp


def det_identity_check(metric: ChartMetric, u: ScalarField,
                       q: GeometricQuantities | None = None) -> float:
    """Worst relative deviation of det(g_ij) from det(sigma) W^2."""
    q = compute_quantities(metric, u) if q is None else q
    lhs = np.linalg.det(q.induced)
    rhs = np.linalg.det(q.sigma) * q.W ** 2
    return float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))


def inverse_identity_check(metric: ChartMetric, u: ScalarField,
                           q: GeometricQuantities | None = None) -> float:
    """sup |g_ij g^jk - delta_i^k|."""
    q = compute_quantities(metric, u) if q is None else q
    prod = np.einsum("...ij,...jk->...ik", q.induced, q.induced_inv)
    return float(np.max(np.abs(prod - np.eye(q.dim))))


def non_divergence_operator(metric: ChartMetric, u: ScalarField,
                            q: GeometricQuantities | None = None) -> np.ndarray:
    """(1/W) g^ij D_i D_j u = nH at every node."""
    q = compute_quantities(metric, u) if q is None else q
    return q.dim * q.mean_curvature
