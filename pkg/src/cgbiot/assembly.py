"""Sparse assembly of the spatial bilinear forms and elliptic projections.

All meshes are uniform and axis-aligned, so every cell has the same element
matrix; assembly computes it once and scatters it with the cell DoF map.
Vector fields are ordered component-major: ``[u_1 dofs, u_2 dofs]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fe_space import CellQuadrature, FeSpace


def lame_from_young_poisson(E: float, nu: float) -> tuple[float, float]:
    """Plane-strain Lame parameters ``(lam, mu)``."""
    if E <= 0:
        raise ValueError("Young's modulus must be positive")
    if not -1.0 < nu < 0.5:
        raise ValueError(f"Poisson ratio must lie in (-1, 1/2), got {nu}")
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    return lam, mu


@dataclass(frozen=True)
class BiotCoefficients:
    rho: float = 1.0
    alpha: float = 0.9
    c0: float = 0.01
    lam: float = field(default_factory=lambda: lame_from_young_poisson(100.0, 0.35)[0])
    mu: float = field(default_factory=lambda: lame_from_young_poisson(100.0, 0.35)[1])
    K: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        object.__setattr__(self, "K", K)
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.alpha < 0 or self.c0 < 0:
            raise ValueError("alpha and c0 must be non-negative")
        if self.mu <= 0 or self.lam <= -self.mu:
            raise ValueError("need mu > 0 and lam > -mu")
        if K.shape != (2, 2) or not np.allclose(K, K.T) or np.linalg.eigvalsh(K).min() <= 0:
            raise ValueError("permeability must be a symmetric positive definite 2x2 matrix")

    @classmethod
    def from_young_poisson(cls, E: float = 100.0, nu: float = 0.35, **kw) -> "BiotCoefficients":
        lam, mu = lame_from_young_poisson(E, nu)
        return cls(lam=lam, mu=mu, **kw)

    def replace(self, **kw) -> "BiotCoefficients":
        d = dict(rho=self.rho, alpha=self.alpha, c0=self.c0, lam=self.lam, mu=self.mu, K=self.K)
        d.update(kw)
        return BiotCoefficients(**d)


def _quad_points(*spaces: FeSpace) -> int:
    return max(s.degree for s in spaces) + 1


def _check_mesh(a: FeSpace, b: FeSpace):
    if a.mesh != b.mesh:
        raise ValueError("spaces live on different meshes")


def _scatter(Ke, row_dofs, col_dofs, shape):
    nc = row_dofs.shape[0]
    rows = np.broadcast_to(row_dofs[:, :, None], (nc,) + Ke.shape)
    cols = np.broadcast_to(col_dofs[:, None, :], (nc,) + Ke.shape)
    data = np.broadcast_to(Ke, (nc,) + Ke.shape)
    A = sp.coo_matrix((data.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()
    A.sum_duplicates()
    return A


def _vector_dofs(space: FeSpace) -> np.ndarray:
    d = space.cell_dofs
    return np.hstack([d, d + space.n_dofs])


def assemble_mass(space: FeSpace, weight: float = 1.0, n_points: int | None = None) -> sp.csr_matrix:
    cq = CellQuadrature(space, n_points or _quad_points(space))
    Ke = weight * (cq.phi.T * cq.weights) @ cq.phi
    return _scatter(Ke, space.cell_dofs, space.cell_dofs, (space.n_dofs,) * 2)


def _grad_blocks(cq: CellQuadrature):
    d = (cq.dphi_x, cq.dphi_y)
    # G[a][b][i, j] = int d_b(test_i) d_a(trial_j)
    return [[(d[b].T * cq.weights) @ d[a] for b in range(2)] for a in range(2)]


def assemble_elasticity(space_u: FeSpace, lam: float, mu: float, n_points: int | None = None):
    """Isotropic elasticity form ``<2 mu eps(u) + lam div(u) I, eps(v)>`` on the vector space."""
    cq = CellQuadrature(space_u, n_points or _quad_points(space_u))
    G = _grad_blocks(cq)
    K11 = (lam + 2 * mu) * G[0][0] + mu * G[1][1]
    K22 = (lam + 2 * mu) * G[1][1] + mu * G[0][0]
    K12 = mu * G[0][1] + lam * G[1][0]  # test comp 1, trial comp 2
    K21 = mu * G[1][0] + lam * G[0][1]
    Ke = np.block([[K11, K12], [K21, K22]])
    vd = _vector_dofs(space_u)
    return _scatter(Ke, vd, vd, (2 * space_u.n_dofs,) * 2)


def assemble_diffusion(space_p: FeSpace, K, n_points: int | None = None):
    K = np.asarray(K, dtype=float)
    cq = CellQuadrature(space_p, n_points or _quad_points(space_p))
    G = _grad_blocks(cq)
    Ke = sum(K[a, b] * G[b][a] for a in range(2) for b in range(2))
    return _scatter(Ke, space_p.cell_dofs, space_p.cell_dofs, (space_p.n_dofs,) * 2)


def assemble_vector_laplacian(space_u: FeSpace) -> sp.csr_matrix:
    """``<grad u, grad v>`` on the vector space (for unweighted energy norms)."""
    L = assemble_diffusion(space_u, np.eye(2))
    return sp.block_diag([L, L], format="csr")


def assemble_divergence(space_u: FeSpace, space_p: FeSpace, n_points: int | None = None):
    """``D[i, j] = <div phi_j, psi_i>``; rows are p-DoFs, columns vector u-DoFs."""
    _check_mesh(space_u, space_p)
    nq = n_points or _quad_points(space_u, space_p)
    cu = CellQuadrature(space_u, nq)
    cp = CellQuadrature(space_p, nq)
    Ke = np.hstack([(cp.phi.T * cp.weights) @ cu.dphi_x, (cp.phi.T * cp.weights) @ cu.dphi_y])
    return _scatter(Ke, space_p.cell_dofs, _vector_dofs(space_u),
                    (space_p.n_dofs, 2 * space_u.n_dofs))


def apply_dirichlet(op, rows, cols=None) -> sp.csr_matrix:
    """Symmetric elimination: zero constrained rows/columns, unit diagonal if square."""
    op = sp.csr_matrix(op)
    cols = rows if cols is None else cols
    rkeep = np.ones(op.shape[0])
    rkeep[np.asarray(rows, dtype=int)] = 0.0
    ckeep = np.ones(op.shape[1])
    ckeep[np.asarray(cols, dtype=int)] = 0.0
    out = sp.diags(rkeep) @ op @ sp.diags(ckeep)
    if op.shape[0] == op.shape[1]:
        out = out + sp.diags(1.0 - rkeep)
    out = sp.csr_matrix(out)
    out.eliminate_zeros()
    return out


def load_vector(space: FeSpace, cq: CellQuadrature, values) -> np.ndarray:
    """``int f psi_i`` from point values ``(n_cells, nq)`` of ``f``."""
    local = (values * cq.weights) @ cq.phi  # (n_cells, n_local)
    return np.bincount(space.cell_dofs.ravel(), weights=local.ravel(), minlength=space.n_dofs)


def gradient_load_vector(space: FeSpace, cq: CellQuadrature, flux1, flux2) -> np.ndarray:
    """``int (flux . grad psi_i)`` from point values of a vector flux."""
    local = (flux1 * cq.weights) @ cq.dphi_x + (flux2 * cq.weights) @ cq.dphi_y
    return np.bincount(space.cell_dofs.ravel(), weights=local.ravel(), minlength=space.n_dofs)


def vector_free_dofs(space: FeSpace) -> np.ndarray:
    f = space.free_dofs
    return np.concatenate([f, f + space.n_dofs])


def _solve_free(A, rhs, free):
    x = np.zeros(A.shape[0])
    Af = sp.csc_matrix(A[free][:, free])
    x[free] = spla.spsolve(Af, rhs[free])
    return x


def elliptic_projection(grad, space: FeSpace, kind: str, coeffs: BiotCoefficients,
                        n_points: int | None = None) -> np.ndarray:
    """Ritz projection of an exact field given by its gradient.

    ``kind="diffusion"``: ``grad(x1, x2) -> (w_1, w_2)`` and the projection
    onto the scalar space w.r.t. ``<K grad ., grad .>``.
    ``kind="elasticity"``: ``grad(x1, x2) -> [[d1 w1, d2 w1], [d1 w2, d2 w2]]``
    and the projection onto the vector space w.r.t. the elasticity form.
    Boundary values are zero.
    """
    cq = CellQuadrature(space, n_points or space.degree + 2)
    if kind == "diffusion":
        g1, g2 = grad(cq.x1, cq.x2)
        K = coeffs.K
        rhs = gradient_load_vector(space, cq, K[0, 0] * g1 + K[0, 1] * g2,
                                   K[1, 0] * g1 + K[1, 1] * g2)
        A = assemble_diffusion(space, K)
        return _solve_free(A, rhs, space.free_dofs)
    if kind == "elasticity":
        J = grad(cq.x1, cq.x2)
        lam, mu = coeffs.lam, coeffs.mu
        div = J[0][0] + J[1][1]
        s11 = 2 * mu * J[0][0] + lam * div
        s22 = 2 * mu * J[1][1] + lam * div
        s12 = mu * (J[0][1] + J[1][0])
        rhs = np.concatenate([gradient_load_vector(space, cq, s11, s12),
                              gradient_load_vector(space, cq, s12, s22)])
        A = assemble_elasticity(space, lam, mu)
        return _solve_free(A, rhs, vector_free_dofs(space))
    raise ValueError(f"unknown operator kind {kind!r}")


@dataclass
class SpatialOperators:
    """Assembled operators restricted to the Dirichlet-free DoFs.

    ``Mu`` acts on one displacement component, ``A`` and ``D`` on the
    component-major vector; ``D`` has p-rows.
    """

    space_u: FeSpace
    space_p: FeSpace
    Mu: sp.csr_matrix
    Mp: sp.csr_matrix
    A: sp.csr_matrix
    B: sp.csr_matrix
    D: sp.csr_matrix
    L: sp.csr_matrix  # vector Laplacian, for the unweighted energy norm

    @cached_property
    def Mu2(self) -> sp.csr_matrix:
        return sp.block_diag([self.Mu, self.Mu], format="csr")

    @property
    def n_u(self) -> int:
        return self.space_u.n_free

    @property
    def n_p(self) -> int:
        return self.space_p.n_free

    def free_u(self) -> np.ndarray:
        return vector_free_dofs(self.space_u)

    def free_p(self) -> np.ndarray:
        return self.space_p.free_dofs


def assemble_operators(space_u: FeSpace, space_p: FeSpace, coeffs: BiotCoefficients) -> SpatialOperators:
    _check_mesh(space_u, space_p)
    fu, fp, fv = space_u.free_dofs, space_p.free_dofs, vector_free_dofs(space_u)

    def restrict(M, r, c):
        return sp.csr_matrix(M[r][:, c])

    return SpatialOperators(
        space_u=space_u,
        space_p=space_p,
        Mu=restrict(assemble_mass(space_u), fu, fu),
        Mp=restrict(assemble_mass(space_p), fp, fp),
        A=restrict(assemble_elasticity(space_u, coeffs.lam, coeffs.mu), fv, fv),
        B=restrict(assemble_diffusion(space_p, coeffs.K), fp, fp),
        D=restrict(assemble_divergence(space_u, space_p), fp, fv),
        L=restrict(assemble_vector_laplacian(space_u), fv, fv),
    )
