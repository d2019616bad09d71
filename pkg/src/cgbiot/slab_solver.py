"""Slab systems of the continuous Galerkin-Petrov scheme and time marching.

Per slab the unknowns are the spatial coefficient vectors of ``u, v, p`` at
the Gauss-Lobatto time nodes ``1..k`` (node 0 is the known slab-start value).
Ordering is temporal-node-major, fields ``(u, v, p)``, component-major in
``u`` and ``v``.  Rows come in the same layout: for every test index ``i``
the kinematic, momentum and flow equations.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    BiotCoefficients,
    SpatialOperators,
    elliptic_projection,
    load_vector,
    vector_free_dofs,
)
from .fe_space import CellQuadrature, interpolate_nodal
from .quadrature import gauss_lobatto
from .time_basis import TemporalCoupling, TimePartition, lagrange_matrix, temporal_coupling

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


class SolverError(RuntimeError):
    pass


@dataclass
class SlabSystem:
    """Slab operator for a fixed step size.

    The kinematic rows are eliminated exactly (the mass matrix is SPD), so
    the direct solver factorizes only the ``(v, p)`` system.  The full block
    matrix is assembled on demand; residuals are computed matrix-free.
    """

    coupling: TemporalCoupling
    ops: SpatialOperators
    coeffs: BiotCoefficients
    solver: str = "lu"
    coupling_sign: float = 1.0
    factorizations: int = 0
    _factor: object = field(default=None, repr=False)
    _mass: object = field(default=None, repr=False)
    _matrix: object = field(default=None, repr=False)
    _start: object = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return self.coupling.a.shape[0]

    @property
    def block_sizes(self) -> tuple[int, int, int]:
        nu = 2 * self.ops.n_u
        return nu, nu, self.ops.n_p

    @property
    def node_size(self) -> int:
        return sum(self.block_sizes)

    @property
    def matrix(self) -> sp.csc_matrix:
        if self._matrix is None:
            self._matrix, self._start = _assemble_full(self)
        return self._matrix

    @property
    def start_matrix(self) -> sp.csr_matrix:
        """Maps free-DoF start values ``[u0, v0, p0]`` to row contributions."""
        if self._start is None:
            self._matrix, self._start = _assemble_full(self)
        return self._start

    def _rows(self, a, b, X) -> np.ndarray:
        """Rows generated by trial coefficients ``X`` of shape ``(m, node_size)``."""
        ops, co = self.ops, self.coeffs
        nu = 2 * ops.n_u
        U, V, P = X[:, :nu].T, X[:, nu:2 * nu].T, X[:, 2 * nu:].T
        Mu2 = ops.Mu2
        MU, MV = (Mu2 @ U).T, (Mu2 @ V).T
        kin = a @ MU - b @ MV
        mom = (b @ (ops.A @ U).T + co.rho * (a @ MV)
               - self.coupling_sign * co.alpha * (b @ (ops.D.T @ P).T))
        flow = co.alpha * (a @ (ops.D @ U).T) + co.c0 * (a @ (ops.Mp @ P).T) + b @ (ops.B @ P).T
        return np.hstack([kin, mom, flow])

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Full slab matrix times ``x``."""
        c = self.coupling
        return self._rows(c.a[:, 1:], c.b[:, 1:], np.asarray(x).reshape(self.k, -1)).ravel()

    def apply_start(self, start: np.ndarray) -> np.ndarray:
        c = self.coupling
        return self._rows(c.a[:, :1], c.b[:, :1], np.asarray(start).reshape(1, -1)).ravel()

    def factorize(self):
        if self._factor is not None:
            return
        if self.solver == "lu":
            try:
                self._mass = spla.splu(sp.csc_matrix(self.ops.Mu))
                self._factor = spla.splu(_assemble_reduced(self), permc_spec="MMD_AT_PLUS_A")
            except RuntimeError as exc:
                raise SolverError(f"LU factorization failed: {exc}") from exc
        elif self.solver == "gmres":
            ilu = spla.spilu(self.matrix, drop_tol=1e-5, fill_factor=20)
            self._factor = spla.LinearOperator(self.matrix.shape, ilu.solve)
        else:
            raise ValueError(f"unknown solver {self.solver!r}")
        self.factorizations += 1

    def _direct(self, rhs: np.ndarray) -> np.ndarray:
        """Condensed direct solve of the full system."""
        ops, co, k = self.ops, self.coeffs, self.k
        nu = 2 * ops.n_u
        R = rhs.reshape(k, -1)
        rk, rm, rf = R[:, :nu], R[:, nu:2 * nu], R[:, 2 * nu:]
        n1 = ops.n_u
        Z = np.hstack([self._mass.solve(np.ascontiguousarray(rk[:, :n1].T)).T,
                       self._mass.solve(np.ascontiguousarray(rk[:, n1:].T)).T])
        Ah, Bh = self.coupling.a[:, 1:], self.coupling.b[:, 1:]
        BAinv = Bh @ np.linalg.inv(Ah)
        red = np.hstack([rm - (ops.A @ (BAinv @ Z).T).T, rf - co.alpha * (ops.D @ Z.T).T])
        Y = self._factor.solve(red.ravel()).reshape(k, -1)
        V, P = Y[:, :nu], Y[:, nu:]
        U = np.linalg.solve(Ah, Z + Bh @ V)
        return np.hstack([U, V, P]).ravel()

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return solve_slab(self, rhs)


def _blocks(coupling: TemporalCoupling, ops: SpatialOperators, coeffs: BiotCoefficients,
            i: int, j: int, coupling_sign: float = 1.0):
    """3x3 field blocks coupling test index ``i`` to trial node ``j``."""
    a, b = coupling.a[i, j], coupling.b[i, j]
    Mu2 = ops.Mu2
    return [
        [a * Mu2, -b * Mu2, None],
        [b * ops.A, coeffs.rho * a * Mu2, -coupling_sign * coeffs.alpha * b * ops.D.T],
        [coeffs.alpha * a * ops.D, None, coeffs.c0 * a * ops.Mp + b * ops.B],
    ]


def _assemble_full(system: SlabSystem):
    ops, coupling, k = system.ops, system.coupling, system.k
    grid = [[None] * (3 * k) for _ in range(3 * k)]
    start = [[None] * 3 for _ in range(3 * k)]
    for i in range(k):
        for j in range(k + 1):
            blk = _blocks(coupling, ops, system.coeffs, i, j, system.coupling_sign)
            for r in range(3):
                for c in range(3):
                    if j == 0:
                        start[3 * i + r][c] = blk[r][c]
                    else:
                        grid[3 * i + r][3 * (j - 1) + c] = blk[r][c]
    # keep every diagonal block present so bmat infers sizes
    sizes = [2 * ops.n_u, 2 * ops.n_u, ops.n_p]
    for i in range(k):
        for r in range(3):
            if grid[3 * i + r][3 * i + r] is None:
                grid[3 * i + r][3 * i + r] = sp.csr_matrix((sizes[r], sizes[r]))
        for c in range(3):
            if all(start[3 * i + r][c] is None for r in range(3)):
                start[3 * i][c] = sp.csr_matrix((sizes[0], sizes[c]))
    return sp.bmat(grid, format="csc"), sp.bmat(start, format="csr")


def _assemble_reduced(system: SlabSystem) -> sp.csc_matrix:
    """``(v, p)`` system left after eliminating the displacement coefficients."""
    ops, co, k = system.ops, system.coeffs, system.k
    Ah, Bh = system.coupling.a[:, 1:], system.coupling.b[:, 1:]
    BAB = Bh @ np.linalg.solve(Ah, Bh)
    Mu2 = ops.Mu2
    grid = [[None] * (2 * k) for _ in range(2 * k)]
    for i in range(k):
        for j in range(k):
            grid[2 * i][2 * j] = co.rho * Ah[i, j] * Mu2 + BAB[i, j] * ops.A
            grid[2 * i][2 * j + 1] = -system.coupling_sign * co.alpha * Bh[i, j] * ops.D.T
            grid[2 * i + 1][2 * j] = co.alpha * Bh[i, j] * ops.D
            grid[2 * i + 1][2 * j + 1] = co.c0 * Ah[i, j] * ops.Mp + Bh[i, j] * ops.B
    return sp.bmat(grid, format="csc")


def assemble_slab_matrix(ops: SpatialOperators, coupling: TemporalCoupling,
                         coeffs: BiotCoefficients, solver: str = "lu",
                         coupling_sign: float = 1.0) -> SlabSystem:
    """Slab problem for one step size.

    ``coupling_sign`` flips the pressure term in the momentum equation; it
    exists only for fault-injection checks.
    """
    if ops.D.shape != (ops.n_p, 2 * ops.n_u) or ops.A.shape != (2 * ops.n_u,) * 2:
        raise ValueError("operator dimensions do not match the spaces")
    if solver not in ("lu", "gmres"):
        raise ValueError(f"unknown solver {solver!r}")
    return SlabSystem(coupling, ops, coeffs, solver=solver, coupling_sign=coupling_sign)


LoadF = Callable[[np.ndarray, np.ndarray, float], tuple]
LoadG = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


class LoadAssembler:
    """Evaluates ``<rho f(t), chi>`` and ``<g(t), psi>`` on the free DoFs."""

    def __init__(self, ops: SpatialOperators, coeffs: BiotCoefficients,
                 f: LoadF | None, g: LoadG | None, n_points: int | None = None):
        self.ops, self.coeffs, self.f, self.g = ops, coeffs, f, g
        su, spp = ops.space_u, ops.space_p
        self.cq_u = CellQuadrature(su, n_points or su.degree + 2)
        self.cq_p = CellQuadrature(spp, n_points or spp.degree + 2)
        self.fu, self.fp = su.free_dofs, spp.free_dofs

    def momentum(self, t: float) -> np.ndarray:
        if self.f is None:
            return np.zeros(2 * self.ops.n_u)
        f1, f2 = self.f(self.cq_u.x1, self.cq_u.x2, t)
        s = self.ops.space_u
        rho = self.coeffs.rho
        return np.concatenate([rho * load_vector(s, self.cq_u, f1)[self.fu],
                               rho * load_vector(s, self.cq_u, f2)[self.fu]])

    def flow(self, t: float) -> np.ndarray:
        if self.g is None:
            return np.zeros(self.ops.n_p)
        vals = self.g(self.cq_p.x1, self.cq_p.x2, t)
        return load_vector(self.ops.space_p, self.cq_p, vals)[self.fp]


def assemble_slab_rhs(system: SlabSystem, t_a: float, t_b: float, start: np.ndarray,
                      loads: LoadAssembler | None = None) -> np.ndarray:
    """Right-hand side on slab ``(t_a, t_b]`` from free-DoF start values ``[u0, v0, p0]``.

    Loads are sampled at the Gauss-Lobatto times and weighted with the test
    basis, which integrates them exactly up to temporal degree ``k``.
    """
    k = system.k
    nu, _, npp = system.block_sizes
    rhs = -system.apply_start(start)
    if loads is not None and (loads.f is not None or loads.g is not None):
        times = 0.5 * (t_a + t_b) + 0.5 * (t_b - t_a) * gauss_lobatto(k + 1).nodes
        F = np.stack([loads.momentum(t) for t in times])  # (k+1, nu)
        G = np.stack([loads.flow(t) for t in times])
        W = system.coupling.rhs_weights * ((t_b - t_a) / system.coupling.tau)
        rhs = rhs.reshape(k, -1)
        rhs[:, nu:2 * nu] += W @ F
        rhs[:, 2 * nu:] += W @ G
        rhs = rhs.ravel()
    return rhs


def solve_slab(system: SlabSystem, rhs: np.ndarray) -> np.ndarray:
    """Solve with the cached factorization; checks the relative residual."""
    system.factorize()
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros_like(rhs)
    if system.solver == "lu":
        x = system._direct(rhs)
        res = rhs - system.apply(x)
        if np.linalg.norm(res) > RESIDUAL_TOL * bnorm:
            x = x + system._direct(res)  # one step of iterative refinement
    else:
        x, info = spla.gmres(system.matrix, rhs, M=system._factor, rtol=1e-12,
                             restart=200, maxiter=50)
        if info != 0:
            raise SolverError(f"GMRES did not converge (info={info})")
    rel = np.linalg.norm(rhs - system.apply(x)) / bnorm
    log.debug("slab residual %.3e", rel)
    if not np.isfinite(rel) or rel > RESIDUAL_TOL:
        raise SolverError(f"slab residual {rel:.3e} exceeds {RESIDUAL_TOL:.0e}")
    return x


@dataclass
class Trajectory:
    """Discrete solution; ``u``/``v`` have shape ``(N, k+1, 2 n_dofs_u)``, ``p`` ``(N, k+1, n_dofs_p)``."""

    partition: TimePartition
    k: int
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_slabs(self) -> int:
        return self.partition.n_slabs

    def slab_values(self, n: int, t, derivative: bool = False):
        """``(u, v, p)`` on slab ``n`` at times ``t`` (array), each ``(len(t), size)``."""
        s = np.atleast_1d(self.partition.to_reference(n, t))
        L = lagrange_matrix(gauss_lobatto(self.k + 1).nodes, s, derivative=derivative)
        if derivative:
            L = L * (2.0 / self.partition.lengths[n])
        return L @ self.u[n], L @ self.v[n], L @ self.p[n]

    def at(self, t: float, side: str = "left"):
        """Values at ``t``; ``side="right"`` takes the limit from the next slab at a node."""
        n = self.partition.locate(t)
        if side == "right" and n + 1 < self.n_slabs and np.isclose(t, self.partition.boundaries[n + 1]):
            n += 1
        u, v, p = self.slab_values(n, [t])
        return u[0], v[0], p[0]

    def node_values(self, n: int):
        """State at ``t_n`` (``n = 0..N``)."""
        if n == 0:
            return self.u[0, 0], self.v[0, 0], self.p[0, 0]
        return self.u[n - 1, -1], self.v[n - 1, -1], self.p[n - 1, -1]

    def save(self, path: str, fmt: str = "npz"):
        """Dump nodal coefficient vectors with a small header."""
        header = dict(self.meta, k=self.k, n_slabs=self.n_slabs,
                      t_start=self.partition.t_start, t_end=self.partition.t_end,
                      size_u=self.u.shape[-1], size_p=self.p.shape[-1])
        if fmt == "npz":
            np.savez_compressed(path, header=json.dumps(header), boundaries=self.partition.boundaries,
                                u=self.u, v=self.v, p=self.p)
        elif fmt == "csv":
            with open(path, "w") as fh:
                fh.write("# " + json.dumps(header) + "\n")
                fh.write("slab,node,field,values\n")
                for n in range(self.n_slabs):
                    for j in range(self.k + 1):
                        for name in ("u", "v", "p"):
                            vals = " ".join(repr(float(x)) for x in getattr(self, name)[n, j])
                            fh.write(f"{n},{j},{name},{vals}\n")
        else:
            raise ValueError(f"unknown trajectory format {fmt!r}")

    @classmethod
    def load(cls, path: str) -> "Trajectory":
        with np.load(path) as data:
            header = json.loads(str(data["header"]))
            part = TimePartition(data["boundaries"])
            return cls(part, header.pop("k"), data["u"], data["v"], data["p"], meta=header)


def discrete_initial_values(traces, ops: SpatialOperators, coeffs: BiotCoefficients,
                            mode: str = "ritz"):
    """Full-length ``(u0, v0, p0)`` by elliptic projection or nodal interpolation."""
    su, spp = ops.space_u, ops.space_p
    if mode == "ritz":
        u0 = elliptic_projection(traces.grad_u, su, "elasticity", coeffs)
        v0 = elliptic_projection(traces.grad_v, su, "elasticity", coeffs)
        p0 = elliptic_projection(traces.grad_p, spp, "diffusion", coeffs)
    elif mode == "nodal":
        def vec(fn):
            return np.concatenate([interpolate_nodal(su, lambda x, y, c=c: fn(x, y)[c]) for c in range(2)])
        u0, v0 = vec(traces.u), vec(traces.v)
        p0 = interpolate_nodal(spp, traces.p)
        # homogeneous Dirichlet data
        u0[np.tile(su.boundary_mask, 2)] = 0.0
        v0[np.tile(su.boundary_mask, 2)] = 0.0
        p0[spp.boundary_mask] = 0.0
    else:
        raise ValueError(f"unknown initial-data mode {mode!r}")
    return u0, v0, p0


def march(ops: SpatialOperators, coeffs: BiotCoefficients, partition: TimePartition, k: int,
          initial, f: LoadF | None = None, g: LoadG | None = None, solver: str = "lu",
          system: SlabSystem | None = None) -> Trajectory:
    """Solve slab by slab starting from full-length initial vectors ``(u0, v0, p0)``.

    The slab matrix is assembled and factorized once; a uniform partition is
    required for that reuse.
    """
    lengths = partition.lengths
    if not np.allclose(lengths, lengths[0], rtol=1e-12):
        raise ValueError("march requires a uniform time partition")
    if system is None:
        system = assemble_slab_matrix(ops, temporal_coupling(k, float(lengths[0])), coeffs, solver)
    loads = LoadAssembler(ops, coeffs, f, g) if (f is not None or g is not None) else None
    fu, fp = vector_free_dofs(ops.space_u), ops.space_p.free_dofs
    nu_full, np_full = 2 * ops.space_u.n_dofs, ops.space_p.n_dofs
    N = partition.n_slabs
    U = np.zeros((N, k + 1, nu_full))
    V = np.zeros((N, k + 1, nu_full))
    P = np.zeros((N, k + 1, np_full))
    u0, v0, p0 = (np.asarray(x, dtype=float) for x in initial)
    state = np.concatenate([u0[fu], v0[fu], p0[fp]])
    nu, _, npp = system.block_sizes
    for n in range(N):
        t_a, t_b = partition.slab(n)
        rhs = assemble_slab_rhs(system, t_a, t_b, state, loads)
        try:
            x = solve_slab(system, rhs).reshape(k, -1)
        except SolverError as exc:
            raise SolverError(f"slab {n} ({t_a:.6g}, {t_b:.6g}]: {exc}") from exc
        nodes = np.vstack([state, x])
        U[n][:, fu] = nodes[:, :nu]
        V[n][:, fu] = nodes[:, nu:2 * nu]
        P[n][:, fp] = nodes[:, 2 * nu:]
        state = nodes[-1]
    traj = Trajectory(partition, k, U, V, P)
    traj.meta["factorizations"] = system.factorizations
    return traj


def energy(u, v, p, ops: SpatialOperators, coeffs: BiotCoefficients):
    """``(elastic energy, pressure energy, unweighted |||(u, v)|||)`` of a full-length state."""
    fu, fp = vector_free_dofs(ops.space_u), ops.space_p.free_dofs
    u, v, p = np.asarray(u)[fu], np.asarray(v)[fu], np.asarray(p)[fp]
    Mu2 = ops.Mu2
    elastic = np.sqrt(max(0.5 * u @ (ops.A @ u) + 0.5 * coeffs.rho * v @ (Mu2 @ v), 0.0))
    pressure = np.sqrt(max(0.5 * coeffs.c0 * p @ (ops.Mp @ p), 0.0))
    plain = np.sqrt(max(u @ (ops.L @ u) + v @ (Mu2 @ v), 0.0))
    return elastic, pressure, plain
