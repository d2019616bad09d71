"""Shared fixtures: a polynomial exact solution the discretization reproduces."""

from types import SimpleNamespace

import numpy as np
import pytest
from numpy.polynomial import Polynomial

from cgbiot.assembly import BiotCoefficients


class PolynomialCase:
    """``u = (T_u b, T_u b)``, ``p = T_p b`` with the bubble ``b = x(1-x) y(1-y)``.

    ``b`` lies in Q_2, so for pressure degree >= 2 and temporal factors of
    degree <= k the scheme is exact.
    """

    def __init__(self, coeffs: BiotCoefficients, tu=(1.0, 0.5, -2.0), tp=(0.5, 1.0, 0.3)):
        self.coeffs = coeffs
        self.Tu, self.Tp = Polynomial(tu), Polynomial(tp)

    @staticmethod
    def bubble(x1, x2):
        x1, x2 = np.asarray(x1, float), np.asarray(x2, float)
        bx, by = x1 * (1 - x1), x2 * (1 - x2)
        dx, dy = 1 - 2 * x1, 1 - 2 * x2
        return SimpleNamespace(b=bx * by, d1=dx * by, d2=bx * dy,
                               d11=-2 * by, d22=-2 * bx, d12=dx * dy)

    def exact_fields(self, x1, x2, t):
        B = self.bubble(x1, x2)
        t = np.asarray(t, float)
        Tu, dTu, ddTu = self.Tu(t), self.Tu.deriv()(t), self.Tu.deriv(2)(t)
        Tp, dTp = self.Tp(t), self.Tp.deriv()(t)
        u = Tu * B.b
        g = (Tu * B.d1, Tu * B.d2)
        return SimpleNamespace(
            u=(u, u), v=(dTu * B.b, dTu * B.b), p=Tp * B.b,
            grad_u=(g, g), grad_v=((dTu * B.d1, dTu * B.d2),) * 2,
            grad_p=(Tp * B.d1, Tp * B.d2), dtt_u=(ddTu * B.b,) * 2,
            dt_p=dTp * B.b, dt_div_u=dTu * (B.d1 + B.d2),
        )

    def rhs_f(self, x1, x2, t):
        co = self.coeffs
        B = self.bubble(x1, x2)
        Tu, ddTu, Tp = self.Tu(t), self.Tu.deriv(2)(t), self.Tp(t)
        lap = B.d11 + B.d22
        grad_div = (B.d11 + B.d12, B.d12 + B.d22)
        out = []
        for c in range(2):
            div_stress = Tu * (co.mu * lap + (co.lam + co.mu) * grad_div[c])
            grad_p = Tp * (B.d1, B.d2)[c]
            out.append(ddTu * B.b + (-div_stress + co.alpha * grad_p) / co.rho)
        return tuple(out)

    def rhs_g(self, x1, x2, t):
        co = self.coeffs
        B = self.bubble(x1, x2)
        K = co.K
        div_flux = self.Tp(t) * (K[0, 0] * B.d11 + (K[0, 1] + K[1, 0]) * B.d12 + K[1, 1] * B.d22)
        return (co.c0 * self.Tp.deriv()(t) * B.b
                + co.alpha * self.Tu.deriv()(t) * (B.d1 + B.d2) - div_flux)

    def initial_traces(self, t0=0.0):
        def at(name):
            return lambda x1, x2: getattr(self.exact_fields(x1, x2, t0), name)
        return SimpleNamespace(u=at("u"), v=at("v"), p=at("p"),
                               grad_u=at("grad_u"), grad_v=at("grad_v"), grad_p=at("grad_p"))


@pytest.fixture
def poly_case():
    return PolynomialCase(BiotCoefficients(K=np.array([[1.2, 0.3], [0.3, 0.8]])))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
