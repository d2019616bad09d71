"""Time meshes, Lagrange bases in time and the temporal slab matrices.

Trial functions on a slab are degree-``k`` Lagrange polynomials on the
``k+1`` Gauss-Lobatto points, test functions are degree ``k-1`` Lagrange
polynomials on the ``k`` Gauss points.  Everything lives on the reference
interval [-1, 1] and is transported by ``t = mid + (tau/2) * s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import QuadratureRule, gauss_legendre, gauss_lobatto


@dataclass(frozen=True)
class TimePartition:
    boundaries: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        if b.ndim != 1 or b.size < 2 or np.any(np.diff(b) <= 0):
            raise ValueError("slab boundaries must be strictly increasing")
        object.__setattr__(self, "boundaries", b)

    @classmethod
    def uniform(cls, t_start: float, t_end: float, n_slabs: int) -> "TimePartition":
        if n_slabs < 1:
            raise ValueError("need at least one slab")
        return cls(np.linspace(t_start, t_end, n_slabs + 1))

    @property
    def t_start(self) -> float:
        return float(self.boundaries[0])

    @property
    def t_end(self) -> float:
        return float(self.boundaries[-1])

    @property
    def n_slabs(self) -> int:
        return self.boundaries.size - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    @property
    def tau(self) -> float:
        return float(self.lengths.max())

    def slab(self, n: int) -> tuple[float, float]:
        """Endpoints of slab ``n`` (0-based)."""
        return float(self.boundaries[n]), float(self.boundaries[n + 1])

    def locate(self, t: float) -> int:
        """Index of the slab ``(t_{n-1}, t_n]`` containing ``t``; t_start maps to slab 0."""
        if t < self.t_start - 1e-14 or t > self.t_end + 1e-14:
            raise ValueError(f"t={t} outside [{self.t_start}, {self.t_end}]")
        n = int(np.searchsorted(self.boundaries, t, side="left")) - 1
        return min(max(n, 0), self.n_slabs - 1)

    def to_reference(self, n: int, t):
        a, b = self.slab(n)
        return (2.0 * np.asarray(t, dtype=float) - (a + b)) / (b - a)


def _check_distinct(nodes):
    nodes = np.asarray(nodes, dtype=float)
    if np.unique(nodes).size != nodes.size:
        raise ValueError("Lagrange nodes must be distinct")
    return nodes


def lagrange_eval(nodes, j: int, t):
    """Value of the ``j``-th Lagrange cardinal polynomial on ``nodes`` at ``t``."""
    nodes = _check_distinct(nodes)
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    for m, xm in enumerate(nodes):
        if m != j:
            out = out * (t - xm) / (nodes[j] - xm)
    return out


def lagrange_deriv(nodes, j: int, t):
    """Derivative of the ``j``-th Lagrange cardinal polynomial at ``t``."""
    nodes = _check_distinct(nodes)
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for m, xm in enumerate(nodes):
        if m == j:
            continue
        term = np.full_like(t, 1.0 / (nodes[j] - xm))
        for l, xl in enumerate(nodes):
            if l != j and l != m:
                term = term * (t - xl) / (nodes[j] - xl)
        out = out + term
    return out


def lagrange_matrix(nodes, t, derivative: bool = False) -> np.ndarray:
    """Matrix ``L[q, j] = l_j(t_q)`` (or ``l_j'(t_q)``) for all cardinals."""
    f = lagrange_deriv if derivative else lagrange_eval
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.stack([f(nodes, j, t) for j in range(len(nodes))], axis=-1)


@dataclass(frozen=True)
class NodalPolynomial:
    """Polynomial on ``[a, b]`` stored by its values at reference nodes."""

    nodes: np.ndarray
    values: np.ndarray
    interval: tuple[float, float] = (-1.0, 1.0)

    @property
    def degree(self) -> int:
        return len(self.nodes) - 1

    def _ref(self, t):
        a, b = self.interval
        return (2.0 * np.asarray(t, dtype=float) - (a + b)) / (b - a)

    def __call__(self, t):
        s = np.atleast_1d(self._ref(t))
        out = lagrange_matrix(self.nodes, s) @ self.values
        return out if np.ndim(t) else out[0]

    def derivative(self, t):
        a, b = self.interval
        s = np.atleast_1d(self._ref(t))
        d = lagrange_matrix(self.nodes, s, derivative=True) @ self.values * (2.0 / (b - a))
        return d if np.ndim(t) else d[0]


@dataclass(frozen=True)
class TemporalBasis:
    k: int
    trial_rule: QuadratureRule = field(init=False)
    test_rule: QuadratureRule = field(init=False)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"temporal order must be >= 1, got {self.k}")
        object.__setattr__(self, "trial_rule", gauss_lobatto(self.k + 1))
        object.__setattr__(self, "test_rule", gauss_legendre(self.k))

    @property
    def trial_nodes(self) -> np.ndarray:
        return self.trial_rule.nodes

    @property
    def test_nodes(self) -> np.ndarray:
        return self.test_rule.nodes


def interpolate_gl(values, interval=(-1.0, 1.0)) -> NodalPolynomial:
    """Gauss-Lobatto interpolant in ``P_k`` from values at the ``k+1`` nodes."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] < 2:
        raise ValueError("need at least two Gauss-Lobatto values")
    rule = gauss_lobatto(values.shape[0])
    return NodalPolynomial(rule.nodes, values, tuple(interval))


def project_l2_time(w: NodalPolynomial) -> NodalPolynomial:
    """L2 projection of ``w`` in ``P_k`` onto ``P_{k-1}`` on the same interval.

    For inputs of degree at most ``k`` the projection coincides with the
    interpolant at the ``k`` Gauss points, which is how it is computed.
    """
    k = w.degree
    if k < 1:
        return w
    g = gauss_legendre(k)
    a, b = w.interval
    t_g = 0.5 * (a + b) + 0.5 * (b - a) * g.nodes
    return NodalPolynomial(g.nodes, np.asarray(w(t_g)), w.interval)


@dataclass(frozen=True)
class TemporalCoupling:
    """Slab time matrices.

    ``a[i, j] = int phi_j' psi_i``, ``b[i, j] = int phi_j psi_i`` and
    ``rhs_weights[i, mu] = (tau/2) w_mu psi_i(t_mu)`` with ``phi`` the
    Gauss-Lobatto trial basis and ``psi`` the Gauss test basis.
    """

    a: np.ndarray
    b: np.ndarray
    rhs_weights: np.ndarray
    tau: float


def temporal_coupling(k: int, tau: float) -> TemporalCoupling:
    basis = TemporalBasis(k)
    gl = basis.trial_rule
    phi = lagrange_matrix(gl.nodes, gl.nodes)  # identity up to roundoff
    dphi = lagrange_matrix(gl.nodes, gl.nodes, derivative=True)
    psi = lagrange_matrix(basis.test_nodes, gl.nodes)  # (k+1, k)
    # d/dt = (2/tau) d/ds and dt = (tau/2) ds cancel in a
    a = np.einsum("q,qi,qj->ij", gl.weights, psi, dphi)
    b = 0.5 * tau * np.einsum("q,qi,qj->ij", gl.weights, psi, phi)
    rhs = 0.5 * tau * (psi * gl.weights[:, None]).T
    return TemporalCoupling(a, b, rhs, tau)
