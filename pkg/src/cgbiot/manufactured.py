"""Manufactured solution and the forcing terms that make it exact.

The scalar profile is ``phi(x, t) = sin(w1 t^2) sin(w2 x1) sin(w2 x2)``,
with pressure ``p = phi`` and displacement ``u = (phi, phi)`` by default.
All functions broadcast over array arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from .assembly import BiotCoefficients

# displacement direction for each reading of "u = phi * I_2"
DISPLACEMENT_MODES = {"diagonal": (1.0, 1.0), "first": (1.0, 0.0)}


@dataclass(frozen=True)
class ManufacturedCase:
    omega1: float = np.pi
    omega2: float = np.pi
    coeffs: BiotCoefficients = field(default_factory=BiotCoefficients)
    displacement_mode: str = "diagonal"
    t_start: float = 1.0

    def __post_init__(self):
        if self.displacement_mode not in DISPLACEMENT_MODES:
            raise ValueError(f"unknown displacement mode {self.displacement_mode!r}")

    @property
    def direction(self) -> tuple[float, float]:
        return DISPLACEMENT_MODES[self.displacement_mode]

    def time_factor(self, t):
        """``sin(w1 t^2)`` and its first two time derivatives."""
        w, t = self.omega1, np.asarray(t, dtype=float)
        s, c = np.sin(w * t * t), np.cos(w * t * t)
        return s, 2 * w * t * c, 2 * w * c - 4 * w * w * t * t * s

    def space_factor(self, x1, x2):
        """``S = sin(w2 x1) sin(w2 x2)`` and its derivatives up to order two."""
        w = self.omega2
        s1, s2 = np.sin(w * np.asarray(x1)), np.sin(w * np.asarray(x2))
        c1, c2 = np.cos(w * np.asarray(x1)), np.cos(w * np.asarray(x2))
        S = s1 * s2
        return SimpleNamespace(
            S=S, d1=w * c1 * s2, d2=w * s1 * c2,
            d11=-w * w * S, d22=-w * w * S, d12=w * w * c1 * c2,
        )

    def exact_fields(self, x1, x2, t) -> SimpleNamespace:
        """Exact ``u, v, p`` and the derivatives used by the error norms."""
        T, Tt, Ttt = self.time_factor(t)
        Sp = self.space_factor(x1, x2)
        a, b = self.direction
        phi = T * Sp.S
        g1, g2 = T * Sp.d1, T * Sp.d2
        return SimpleNamespace(
            u=(a * phi, b * phi),
            v=(a * Tt * Sp.S, b * Tt * Sp.S),
            p=phi,
            grad_u=((a * g1, a * g2), (b * g1, b * g2)),
            grad_v=((a * Tt * Sp.d1, a * Tt * Sp.d2), (b * Tt * Sp.d1, b * Tt * Sp.d2)),
            grad_p=(g1, g2),
            dt_p=Tt * Sp.S,
            dtt_u=(a * Ttt * Sp.S, b * Ttt * Sp.S),
            div_u=a * g1 + b * g2,
            dt_div_u=Tt * (a * Sp.d1 + b * Sp.d2),
        )

    def rhs_f(self, x1, x2, t):
        """Body force ``f`` (the momentum load is ``rho f``)."""
        co = self.coeffs
        T, _, Ttt = self.time_factor(t)
        Sp = self.space_factor(x1, x2)
        a, b = self.direction
        lap = Sp.d11 + Sp.d22
        grad_div = (a * Sp.d11 + b * Sp.d12, a * Sp.d12 + b * Sp.d22)
        out = []
        for comp, ci in enumerate((a, b)):
            div_stress = co.mu * ci * lap + (co.lam + co.mu) * grad_div[comp]
            grad_p = (Sp.d1, Sp.d2)[comp]
            out.append(ci * Ttt * Sp.S + (-T * div_stress + co.alpha * T * grad_p) / co.rho)
        return tuple(out)

    def rhs_g(self, x1, x2, t):
        co = self.coeffs
        T, Tt, _ = self.time_factor(t)
        Sp = self.space_factor(x1, x2)
        a, b = self.direction
        K = co.K
        div_flux = K[0, 0] * Sp.d11 + (K[0, 1] + K[1, 0]) * Sp.d12 + K[1, 1] * Sp.d22
        return co.c0 * Tt * Sp.S + co.alpha * Tt * (a * Sp.d1 + b * Sp.d2) - T * div_flux

    def initial_traces(self):
        """Callables for ``u(., t0)``, ``dt u(., t0)``, ``p(., t0)`` and their gradients."""
        t0 = self.t_start

        def at(name):
            return lambda x1, x2: getattr(self.exact_fields(x1, x2, t0), name)

        return SimpleNamespace(
            u=at("u"), v=at("v"), p=at("p"),
            grad_u=at("grad_u"), grad_v=at("grad_v"), grad_p=at("grad_p"),
        )
