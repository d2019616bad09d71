import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgbiot.assembly import BiotCoefficients
from cgbiot.manufactured import ManufacturedCase
from cgbiot.runner import manufactured_residuals

CASE = ManufacturedCase()

# computer-algebra evaluation of f and g (plane strain, E=100, nu=0.35,
# rho=1, alpha=0.9, c0=0.01, K=I), frozen
SYMBOLIC = [
    ((1.0, 0.5, 0.5), (-6.2831853071795864769, -6.2831853071795864769), -0.062831853071795864769),
    ((1.3, 0.3, 0.7), (-1366.2137362556130838, -1363.9896761072276758), -10.655401207214273069),
]


@pytest.mark.parametrize("point, f_ref, g_ref", SYMBOLIC)
def test_loads_match_symbolic_values(point, f_ref, g_ref):
    t, x1, x2 = point
    np.testing.assert_allclose(CASE.rhs_f(x1, x2, t), f_ref, rtol=1e-12, atol=1e-12)
    assert CASE.rhs_g(x1, x2, t) == pytest.approx(g_ref, rel=1e-12)


@given(x=st.floats(0, 1), t=st.floats(1, 2), side=st.integers(0, 3))
def test_fields_vanish_on_boundary(x, t, side):
    x1, x2 = [(0.0, x), (1.0, x), (x, 0.0), (x, 1.0)][side]
    ex = CASE.exact_fields(x1, x2, t)
    assert abs(ex.p) < 1e-15 and max(abs(ex.u[0]), abs(ex.u[1])) < 1e-15


def test_fields_vanish_at_sine_zero():
    ex = CASE.exact_fields(0.3, 0.6, np.sqrt(2.0))
    assert abs(ex.p) < 1e-14 and abs(ex.u[0]) < 1e-14
    assert abs(ex.v[0]) > 0.1


@settings(max_examples=30)
@given(x1=st.floats(0.05, 0.95), x2=st.floats(0.05, 0.95), t=st.floats(1, 2))
def test_time_derivative_matches_finite_differences(x1, x2, t):
    d = 1e-5
    ex = CASE.exact_fields(x1, x2, t)
    fd = (CASE.exact_fields(x1, x2, t + d).p - CASE.exact_fields(x1, x2, t - d).p) / (2 * d)
    assert abs(ex.dt_p - fd) < 1e-6
    assert ex.v[0] == pytest.approx(ex.dt_p)


def test_decoupled_limits():
    co = BiotCoefficients(alpha=0.0, c0=0.0, lam=0.0, mu=1e-300)
    case = ManufacturedCase(coeffs=co)
    x1, x2, t = 0.3, 0.8, 1.4
    ex = case.exact_fields(x1, x2, t)
    np.testing.assert_allclose(case.rhs_f(x1, x2, t), ex.dtt_u, rtol=1e-12)
    phi = ex.p
    assert case.rhs_g(x1, x2, t) == pytest.approx(2 * np.pi**2 * phi, rel=1e-12)


def test_flow_load_on_boundary_keeps_coupling_term():
    # phi-terms vanish on the edge x1 = 0, the alpha * dt div u term does not
    g = CASE.rhs_g(0.0, 0.3, 1.2)
    T, Tt, _ = CASE.time_factor(1.2)
    expected = CASE.coeffs.alpha * Tt * np.pi * np.sin(np.pi * 0.3)
    assert g == pytest.approx(expected, rel=1e-12)
    assert abs(g) > 0.1


@pytest.mark.parametrize("mode", ["diagonal", "first"])
def test_pde_residual_at_random_points(mode):
    rng = np.random.default_rng(7)
    case = ManufacturedCase(displacement_mode=mode,
                            coeffs=BiotCoefficients(K=np.array([[1.5, 0.2], [0.2, 0.7]])))
    x1, x2, t = rng.uniform(0, 1, 1000), rng.uniform(0, 1, 1000), rng.uniform(1, 2, 1000)
    mom, flow = manufactured_residuals(case, x1, x2, t)
    assert np.abs(mom).max() < 1e-4
    assert np.abs(flow).max() < 1e-4


def test_residual_detects_wrong_load():
    co = BiotCoefficients()
    bad = ManufacturedCase(coeffs=co)
    good = ManufacturedCase(coeffs=co.replace(mu=0.9 * co.mu))
    # loads from one coefficient set, residual evaluated with another
    object.__setattr__(bad, "rhs_f", good.rhs_f)
    mom, _ = manufactured_residuals(bad, np.array([0.3]), np.array([0.6]), np.array([1.3]))
    assert np.abs(mom).max() > 1e-2


def test_invalid_mode():
    with pytest.raises(ValueError):
        ManufacturedCase(displacement_mode="sideways")


def test_initial_traces():
    tr = CASE.initial_traces()
    np.testing.assert_allclose(tr.p(0.5, 0.5), 0.0, atol=1e-15)
    np.testing.assert_allclose(tr.v(0.5, 0.5), (-2 * np.pi, -2 * np.pi), rtol=1e-14)
