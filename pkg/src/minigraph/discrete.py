"""Discrete area functional and its derivatives on structured meshes.

Each mesh cell carries four corner gradients, one per right triangle of the
two diagonal splittings of the cell.  The cell area is the average of
``W sqrt(sigma)`` over the four corners times the cell volume, with the
metric frozen at the cell centre.  The flux-form residual is minus the first
variation divided by the nodal volume ``h1 h2 sqrt(sigma(node))``, so the
minimizer of the area and the zero of the residual coincide exactly.

Only metrics that are diagonal in the chart are supported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fields import Mesh
from .metric import ChartMetric

__all__ = ["CellData", "cell_data", "corner_gradients", "area", "area_gradient", "area_hessian"]

# local node order in a cell: SW, SE, NW, NE
_A_BOT = np.array([-1.0, 1.0, 0.0, 0.0])
_A_TOP = np.array([0.0, 0.0, -1.0, 1.0])
_B_LEFT = np.array([-1.0, 0.0, 1.0, 0.0])
_B_RIGHT = np.array([0.0, -1.0, 0.0, 1.0])
_CORNERS = ((0, 0), (0, 1), (1, 0), (1, 1))  # (top?, right?)


@dataclass(eq=False)
class CellData:
    nodes: np.ndarray        # (ncells, 4) flat node indices
    s: np.ndarray            # sqrt det sigma at cell centres
    p: np.ndarray            # sigma^11 at cell centres
    q: np.ndarray            # sigma^22 at cell centres
    h1: float
    h2: float
    node_volume: np.ndarray  # (N,)
    n_nodes: int

    @property
    def weight(self) -> np.ndarray:
        return 0.25 * self.h1 * self.h2 * self.s


def cell_data(metric: ChartMetric, mesh: Mesh) -> CellData:
    n1, n2 = mesh.shape
    h1, h2 = mesh.spacing
    ax0, ax1 = mesh.axes
    i = np.arange(n1 - 1)
    if mesh.periodic[1]:
        j = np.arange(n2)
        jn = (j + 1) % n2
        c1 = ax1 + 0.5 * h2
    else:
        j = np.arange(n2 - 1)
        jn = j + 1
        c1 = 0.5 * (ax1[:-1] + ax1[1:])
    c0 = 0.5 * (ax0[:-1] + ax0[1:])
    I, J = np.meshgrid(i, j, indexing="ij")
    _, JN = np.meshgrid(i, jn, indexing="ij")
    flat = lambda a, b: (a * n2 + b).ravel()
    nodes = np.stack([flat(I, J), flat(I + 1, J), flat(I, JN), flat(I + 1, JN)], axis=1)
    C0, C1 = np.meshgrid(c0, c1, indexing="ij")
    centres = np.stack([C0.ravel(), C1.ravel()], axis=-1)
    if mesh.kind == "polar":
        # theta is irrelevant for polar kinds; keep it inside [0, 2pi)
        centres[:, 1] = np.mod(centres[:, 1], 2 * np.pi)
    sig = metric.sigma(centres)
    if np.max(np.abs(sig[:, 0, 1])) > 1e-14 * np.max(np.abs(sig)):
        raise ValueError("the flux discretization needs a metric that is diagonal in the chart")
    s = np.sqrt(sig[:, 0, 0] * sig[:, 1, 1])
    vol = h1 * h2 * metric.sqrt_det(mesh.coords()).ravel()
    return CellData(nodes, s, 1.0 / sig[:, 0, 0], 1.0 / sig[:, 1, 1], h1, h2, vol, n1 * n2)


def corner_gradients(cd: CellData, u_flat: np.ndarray):
    """Edge differences ``a = (a_bottom, a_top)``, ``b = (b_left, b_right)`` per cell."""
    U = u_flat[cd.nodes]
    a = np.stack([U @ _A_BOT, U @ _A_TOP], axis=1) / cd.h1
    b = np.stack([U @ _B_LEFT, U @ _B_RIGHT], axis=1) / cd.h2
    return a, b


def area(cd: CellData, u_flat: np.ndarray):
    """Discrete area; accepts complex input for complex-step differentiation."""
    a, b = corner_gradients(cd, u_flat)
    total = 0.0
    for top, right in _CORNERS:
        W = np.sqrt(1.0 + cd.p * a[:, top] ** 2 + cd.q * b[:, right] ** 2)
        total = total + np.sum(cd.weight * W)
    return total


def _local_vectors():
    A = (_A_BOT, _A_TOP)
    B = (_B_LEFT, _B_RIGHT)
    return A, B


def area_gradient(cd: CellData, u_flat: np.ndarray) -> np.ndarray:
    a, b = corner_gradients(cd, u_flat)
    A, B = _local_vectors()
    local = np.zeros(cd.nodes.shape)
    for top, right in _CORNERS:
        at, br = a[:, top], b[:, right]
        W = np.sqrt(1.0 + cd.p * at ** 2 + cd.q * br ** 2)
        local += ((cd.p * at / W)[:, None] * A[top] / cd.h1
                  + (cd.q * br / W)[:, None] * B[right] / cd.h2)
    local *= cd.weight[:, None]
    return np.bincount(cd.nodes.ravel(), weights=local.ravel(), minlength=cd.n_nodes)


def area_hessian(cd: CellData, u_flat: np.ndarray) -> sp.csr_matrix:
    a, b = corner_gradients(cd, u_flat)
    A, B = _local_vectors()
    local = np.zeros(cd.nodes.shape + (4,))
    for top, right in _CORNERS:
        at, br = a[:, top], b[:, right]
        W = np.sqrt(1.0 + cd.p * at ** 2 + cd.q * br ** 2)
        W3 = W ** 3
        Av = A[top] / cd.h1
        Bv = B[right] / cd.h2
        caa = cd.p / W - (cd.p * at) ** 2 / W3
        cbb = cd.q / W - (cd.q * br) ** 2 / W3
        cab = -cd.p * cd.q * at * br / W3
        AA = np.outer(Av, Av)
        BB = np.outer(Bv, Bv)
        AB = np.outer(Av, Bv) + np.outer(Bv, Av)
        local += caa[:, None, None] * AA + cbb[:, None, None] * BB + cab[:, None, None] * AB
    local *= cd.weight[:, None, None]
    rows = np.broadcast_to(cd.nodes[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(cd.nodes[:, None, :], local.shape).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(cd.n_nodes, cd.n_nodes)).tocsr()
