"""Structured 2-D meshes, grid-sampled fields and finite-difference stencils."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Mesh", "box_mesh", "polar_mesh", "ScalarField", "grid_derivatives", "d1", "d2"]


@dataclass(frozen=True, eq=False)
class Mesh:
    """Tensor-product grid ``axes[0] x axes[1]``.

    ``kind`` is ``"box"`` (both axes bounded) or ``"polar"`` (``(r, theta)``,
    theta periodic with ``n_theta`` nodes and no duplicated seam node).
    ``n_theta == 1`` is the rotationally symmetric reduction.
    """

    kind: str
    axes: tuple[np.ndarray, np.ndarray]
    periodic: tuple[bool, bool]

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.axes[0]), len(self.axes[1]))

    @property
    def spacing(self) -> tuple[float, float]:
        hs = []
        for ax, per in zip(self.axes, self.periodic):
            if per:
                hs.append(2 * math.pi / len(ax))
            else:
                hs.append(float(ax[1] - ax[0]))
        return tuple(hs)

    def coords(self) -> np.ndarray:
        a, b = np.meshgrid(self.axes[0], self.axes[1], indexing="ij")
        return np.stack([a, b], axis=-1)

    @property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        if not self.periodic[0]:
            mask[0, :] = mask[-1, :] = True
        if not self.periodic[1]:
            mask[:, 0] = mask[:, -1] = True
        return mask

    @property
    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask

    def deep_interior_mask(self, depth: int = 2) -> np.ndarray:
        """Nodes at least ``depth`` steps from every non-periodic boundary."""
        mask = np.ones(self.shape, dtype=bool)
        for axis, per in enumerate(self.periodic):
            if per:
                continue
            sl = [slice(None), slice(None)]
            sl[axis] = slice(0, depth)
            mask[tuple(sl)] = False
            sl[axis] = slice(-depth, None)
            mask[tuple(sl)] = False
        return mask

    def header_dims(self) -> str:
        return f"{self.shape[0]}x{self.shape[1]}"

    def same_as(self, other: "Mesh") -> bool:
        return (self.kind == other.kind and self.shape == other.shape
                and all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes)))

    def center_node(self) -> tuple[int, int] | None:
        """Index of the geometric centre of a box mesh, if it is a node."""
        if self.kind != "box":
            return None
        n1, n2 = self.shape
        if n1 % 2 == 0 or n2 % 2 == 0:
            return None
        return (n1 // 2, n2 // 2)


def box_mesh(box, shape) -> Mesh:
    (x0, x1), (y0, y1) = box
    n1, n2 = int(shape[0]), int(shape[1])
    if n1 < 7 or n2 < 7:
        raise ValueError("meshes need at least 5 interior nodes per direction")
    return Mesh("box", (np.linspace(x0, x1, n1), np.linspace(y0, y1, n2)), (False, False))


def polar_mesh(r_min: float, r_max: float, n_r: int, n_theta: int) -> Mesh:
    if n_r < 7:
        raise ValueError("meshes need at least 5 interior nodes per direction")
    if n_theta != 1 and n_theta < 5:
        raise ValueError("n_theta must be 1 (radial reduction) or >= 5")
    if r_min <= 0:
        raise ValueError("polar meshes must exclude the origin")
    theta = 2 * math.pi * np.arange(n_theta) / n_theta
    return Mesh("polar", (np.linspace(r_min, r_max, n_r), theta), (False, True))


@dataclass(eq=False)
class ScalarField:
    """Real values on every node of a mesh."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.mesh.shape:
            raise ValueError(f"values shape {self.values.shape} != mesh shape {self.mesh.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @classmethod
    def from_function(cls, mesh: Mesh, fn) -> "ScalarField":
        c = mesh.coords()
        return cls(mesh, fn(c[..., 0], c[..., 1]))

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.mesh.boundary_mask

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.mesh, values)


def d1(values: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    """First derivative: central inside, second-order one-sided at edges."""
    if periodic:
        return (np.roll(values, -1, axis) - np.roll(values, 1, axis)) / (2 * h)
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    return np.moveaxis(out, 0, axis)


def d2(values: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    """Second derivative: 3-point inside, 4-point one-sided at edges."""
    if periodic:
        return (np.roll(values, -1, axis) - 2 * values + np.roll(values, 1, axis)) / (h * h)
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / (h * h)
    out[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / (h * h)
    out[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / (h * h)
    return np.moveaxis(out, 0, axis)


def grid_derivatives(field: ScalarField | np.ndarray, mesh: Mesh | None = None):
    """Coordinate gradient ``(..., 2)`` and Hessian ``(..., 2, 2)`` of a field.

    Returns ``(grad, hess, one_sided)``.
    """
    if isinstance(field, ScalarField):
        mesh, values = field.mesh, field.values
    else:
        values = np.asarray(field)
    h = mesh.spacing
    per = mesh.periodic
    g = np.stack([d1(values, h[0], 0, per[0]), d1(values, h[1], 1, per[1])], axis=-1)
    hess = np.empty(values.shape + (2, 2), dtype=values.dtype)
    hess[..., 0, 0] = d2(values, h[0], 0, per[0])
    hess[..., 1, 1] = d2(values, h[1], 1, per[1])
    mixed = d1(g[..., 0], h[1], 1, per[1])
    hess[..., 0, 1] = hess[..., 1, 0] = mixed
    return g, hess, mesh.boundary_mask.copy()
