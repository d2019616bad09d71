"""One-dimensional Gauss-Legendre and Gauss-Lobatto rules on [-1, 1]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_NEWTON_TOL = 1e-15
_NEWTON_MAXITER = 100


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    def __len__(self) -> int:
        return len(self.nodes)

    def integrate(self, values) -> float:
        """Weighted sum of ``values`` sampled at the reference nodes."""
        return float(np.dot(self.weights, values))


def legendre(n: int, x):
    """Return ``(P_n(x), P_n'(x))`` by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev, np.zeros_like(x)
    p = x.copy()
    for m in range(1, n):
        p_prev, p = p, ((2 * m + 1) * x * p - m * p_prev) / (m + 1)
    # derivative from P_n and P_{n-1}; only used away from x = +-1
    with np.errstate(divide="ignore", invalid="ignore"):
        dp = n * (x * p - p_prev) / (x * x - 1.0)
    edge = np.isclose(np.abs(x), 1.0)
    if np.any(edge):
        dp = np.where(edge, np.sign(x) ** (n + 1) * n * (n + 1) / 2.0, dp)
    return p, dp


def gauss_legendre(n_points: int) -> QuadratureRule:
    """``n_points``-point Gauss rule, exact to degree ``2 n_points - 1``."""
    if n_points < 1:
        raise ValueError(f"Gauss-Legendre needs n_points >= 1, got {n_points}")
    n = n_points
    # Chebyshev-like initial guess, ascending
    x = -np.cos(np.pi * (np.arange(n) + 0.75) / (n + 0.5))
    for _ in range(_NEWTON_MAXITER):
        p, dp = legendre(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    _, dp = legendre(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    x, w = _symmetrize(x, w)
    return QuadratureRule(x, w, 2 * n - 1)


def gauss_lobatto(n_points: int) -> QuadratureRule:
    """``n_points``-point Gauss-Lobatto rule including both endpoints.

    Interior nodes are the roots of ``P'_{n-1}``; the rule is exact to degree
    ``2 n_points - 3``.
    """
    if n_points < 2:
        raise ValueError(f"Gauss-Lobatto needs n_points >= 2, got {n_points}")
    N = n_points - 1
    x = -np.cos(np.pi * np.arange(n_points) / N)
    interior = x[1:-1].copy()
    for _ in range(_NEWTON_MAXITER):
        if interior.size == 0:
            break
        # roots of q(x) = P_N'(x); with (1-x^2) P_N'' = 2x P_N' - N(N+1) P_N
        p, dp = legendre(N, interior)
        d2p = (2.0 * interior * dp - N * (N + 1) * p) / (1.0 - interior**2)
        dx = dp / d2p
        interior = interior - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    x = np.concatenate(([-1.0], interior, [1.0]))
    p, _ = legendre(N, x)
    w = 2.0 / (N * (N + 1) * p * p)
    x, w = _symmetrize(x, w)
    return QuadratureRule(x, w, 2 * n_points - 3)


def _symmetrize(x, w):
    # enforce exact symmetry about 0, removes last-bit Newton noise
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    if len(x) % 2:
        x[len(x) // 2] = 0.0
    return x, w


def map_affine(rule: QuadratureRule, a: float, b: float):
    """Transport ``rule`` to ``[a, b]``; returns ``(nodes, weights)``."""
    if not a < b:
        raise ValueError(f"interval must satisfy a < b, got [{a}, {b}]")
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * rule.nodes, half * rule.weights
