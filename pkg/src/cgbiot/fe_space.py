"""Structured quadrilateral meshes of the unit square and continuous Q_s spaces."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .quadrature import gauss_legendre, gauss_lobatto
from .time_basis import lagrange_matrix


@dataclass(frozen=True)
class StructuredQuadMesh:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"cells per side must be >= 1, got {self.n}")

    @property
    def cell_size(self) -> float:
        return 1.0 / self.n

    @property
    def h(self) -> float:
        """Cell diameter."""
        return np.sqrt(2.0) / self.n

    @property
    def n_cells(self) -> int:
        return self.n * self.n

    def refine(self) -> "StructuredQuadMesh":
        return StructuredQuadMesh(2 * self.n)

    def cell_origin(self, cell: int) -> tuple[float, float]:
        cx, cy = cell % self.n, cell // self.n
        return cx / self.n, cy / self.n


def reference_nodes(s: int) -> np.ndarray:
    """Local 1D node layout on [0, 1]: Gauss-Lobatto points."""
    return 0.5 * (gauss_lobatto(s + 1).nodes + 1.0)


def tabulate_1d(s: int, points):
    """1D shape values and derivatives at reference ``points`` in [0, 1]."""
    nodes = reference_nodes(s)
    return lagrange_matrix(nodes, points), lagrange_matrix(nodes, points, derivative=True)


@dataclass(frozen=True)
class FeSpace:
    mesh: StructuredQuadMesh
    degree: int
    coords_1d: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")
        n, s = self.mesh.n, self.degree
        loc = reference_nodes(s)
        c = (np.arange(n)[:, None] + loc[None, :-1]).ravel() / n
        object.__setattr__(self, "coords_1d", np.append(c, 1.0))

    @property
    def n_1d(self) -> int:
        return self.degree * self.mesh.n + 1

    @property
    def n_dofs(self) -> int:
        return self.n_1d**2

    @property
    def n_local(self) -> int:
        return (self.degree + 1) ** 2

    @cached_property
    def node_coords(self) -> np.ndarray:
        """Global node coordinates, shape ``(n_dofs, 2)``, x fastest."""
        X, Y = np.meshgrid(self.coords_1d, self.coords_1d, indexing="xy")
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def cell_dofs(self) -> np.ndarray:
        """Global DoF of local node ``a + (s+1) b`` in cell ``cx + n cy``."""
        n, s, m = self.mesh.n, self.degree, self.n_1d
        cx, cy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
        a, b = np.meshgrid(np.arange(s + 1), np.arange(s + 1), indexing="xy")
        ix = cx.ravel()[:, None] * s + a.ravel()[None, :]
        iy = cy.ravel()[:, None] * s + b.ravel()[None, :]
        return ix + m * iy

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        m = self.n_1d
        i = np.arange(self.n_dofs)
        ix, iy = i % m, i // m
        return (ix == 0) | (ix == m - 1) | (iy == 0) | (iy == m - 1)

    @cached_property
    def free_dofs(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    @property
    def n_free(self) -> int:
        return (self.n_1d - 2) ** 2


def build_space(n: int, s: int) -> FeSpace:
    return FeSpace(StructuredQuadMesh(n), s)


def dirichlet_dofs(space: FeSpace) -> np.ndarray:
    return np.flatnonzero(space.boundary_mask)


def eval_basis(space: FeSpace, cell: int, reference_point):
    """Local shape values ``(n_local,)`` and physical gradients ``(n_local, 2)``."""
    if not 0 <= cell < space.mesh.n_cells:
        raise IndexError(f"cell {cell} out of range")
    xi, eta = reference_point
    V, dV = tabulate_1d(space.degree, [xi, eta])
    vx, vy, dx, dy = V[0], V[1], dV[0], dV[1]
    values = np.outer(vy, vx).ravel()
    scale = space.mesh.n  # inverse of the diagonal Jacobian
    grads = np.column_stack([np.outer(vy, dx).ravel(), np.outer(dy, vx).ravel()]) * scale
    return values, grads


def interpolate_nodal(space: FeSpace, f) -> np.ndarray:
    """Nodal interpolant of a scalar field ``f(x1, x2)`` (vectorized)."""
    X = space.node_coords
    return np.broadcast_to(np.asarray(f(X[:, 0], X[:, 1]), dtype=float), (space.n_dofs,)).copy()


class CellQuadrature:
    """Tensor Gauss rule with ``n_points`` per direction on every cell.

    Provides physical points, weights and batched evaluation of discrete
    functions and their gradients at those points.
    """

    def __init__(self, space: FeSpace, n_points: int):
        self.space = space
        self.n_points = n_points
        g = gauss_legendre(n_points)
        q1 = 0.5 * (g.nodes + 1.0)
        w1 = 0.5 * g.weights
        V, dV = tabulate_1d(space.degree, q1)
        n = space.mesh.n
        # 2D point index qx + nq qy, local shape index a + (s+1) b
        self.phi = np.einsum("xa,yb->yxba", V, V).reshape(n_points**2, -1)
        self.dphi_x = np.einsum("xa,yb->yxba", dV, V).reshape(n_points**2, -1) * n
        self.dphi_y = np.einsum("xa,yb->yxba", V, dV).reshape(n_points**2, -1) * n
        self.ref_weights = np.outer(w1, w1).ravel()
        self.weights = self.ref_weights / (n * n)
        mesh = space.mesh
        cx = (np.arange(mesh.n_cells) % n) / n
        cy = (np.arange(mesh.n_cells) // n) / n
        qx = np.tile(q1, n_points) / n
        qy = np.repeat(q1, n_points) / n
        self.x1 = cx[:, None] + qx[None, :]
        self.x2 = cy[:, None] + qy[None, :]

    def _gather(self, coeffs):
        return np.asarray(coeffs)[..., self.space.cell_dofs]

    def values(self, coeffs) -> np.ndarray:
        """Values at quadrature points, shape ``(..., n_cells, nq)``."""
        return self._gather(coeffs) @ self.phi.T

    def gradients(self, coeffs):
        c = self._gather(coeffs)
        return c @ self.dphi_x.T, c @ self.dphi_y.T

    def integrate(self, values) -> np.ndarray:
        """Integral over the domain of point values ``(..., n_cells, nq)``."""
        return np.einsum("...cq,q->...", values, self.weights)
