import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from cgbiot import slab_solver
from cgbiot.assembly import BiotCoefficients, assemble_mass, assemble_operators, vector_free_dofs
from cgbiot.fe_space import build_space
from cgbiot.quadrature import gauss_legendre
from cgbiot.slab_solver import (
    LoadAssembler,
    SolverError,
    Trajectory,
    assemble_slab_matrix,
    assemble_slab_rhs,
    discrete_initial_values,
    energy,
    march,
    solve_slab,
)
from cgbiot.time_basis import TimePartition, lagrange_matrix, temporal_coupling

CO = BiotCoefficients()


def operators(n=2, r=2, coeffs=CO):
    return assemble_operators(build_space(n, r + 1), build_space(n, r), coeffs)


@pytest.fixture(scope="module")
def ops22():
    return operators(2, 2)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_matrix_free_products_match_assembled_matrix(ops22, k):
    system = assemble_slab_matrix(ops22, temporal_coupling(k, 0.05), CO)
    rng = np.random.default_rng(k)
    x = rng.standard_normal(system.matrix.shape[0])
    s0 = rng.standard_normal(system.node_size)
    assert system.matrix.shape == (k * system.node_size,) * 2
    np.testing.assert_allclose(system.apply(x), system.matrix @ x, atol=1e-12 * np.abs(system.matrix @ x).max())
    np.testing.assert_allclose(system.apply_start(s0), system.start_matrix @ s0, atol=1e-11)


@settings(max_examples=10, deadline=None)
@given(k=st.integers(1, 4), seed=st.integers(0, 10**6), tau=st.sampled_from([0.05, 0.01, 0.3]))
def test_forward_multiply_oracle(ops22, k, seed, tau):
    system = assemble_slab_matrix(ops22, temporal_coupling(k, tau), CO)
    x = np.random.default_rng(seed).standard_normal(k * system.node_size)
    y = solve_slab(system, system.apply(x))
    assert np.abs(y - x).max() <= 1e-9 * np.abs(x).max()


def test_condensed_solve_agrees_with_full_sparse_solve(ops22):
    system = assemble_slab_matrix(ops22, temporal_coupling(3, 0.05), CO)
    b = np.random.default_rng(3).standard_normal(system.matrix.shape[0])
    ref = spla.spsolve(system.matrix, b)
    np.testing.assert_allclose(system.solve(b), ref, rtol=1e-7, atol=1e-9 * np.abs(ref).max())


def test_gmres_path(ops22):
    system = assemble_slab_matrix(ops22, temporal_coupling(2, 0.05), CO, solver="gmres")
    x = np.random.default_rng(0).standard_normal(system.matrix.shape[0])
    np.testing.assert_allclose(solve_slab(system, system.matrix @ x), x, rtol=1e-8, atol=1e-8)


def test_factorization_reused(ops22):
    system = assemble_slab_matrix(ops22, temporal_coupling(2, 0.05), CO)
    for _ in range(3):
        system.solve(np.ones(system.matrix.shape[0]))
    assert system.factorizations == 1
    assert np.array_equal(system.solve(np.zeros(system.matrix.shape[0])), np.zeros(system.matrix.shape[0]))


def test_singular_system_raises(ops22, monkeypatch):
    system = assemble_slab_matrix(ops22, temporal_coupling(1, 0.05), CO)
    size = system.node_size - system.block_sizes[0]
    monkeypatch.setattr(slab_solver, "_assemble_reduced", lambda s: sp.csc_matrix((size, size)))
    with pytest.raises(SolverError):
        system.solve(np.ones(system.node_size))


def test_invalid_inputs(ops22):
    with pytest.raises(ValueError):
        assemble_slab_matrix(ops22, temporal_coupling(1, 0.05), CO, solver="cg")
    part = TimePartition(np.array([0.0, 0.1, 0.3]))
    zero = (np.zeros(2 * ops22.space_u.n_dofs),) * 2 + (np.zeros(ops22.space_p.n_dofs),)
    with pytest.raises(ValueError):
        march(ops22, CO, part, 1, zero)


def test_zero_data_gives_zero_trajectory(ops22):
    zero = (np.zeros(2 * ops22.space_u.n_dofs),) * 2 + (np.zeros(ops22.space_p.n_dofs),)
    traj = march(ops22, CO, TimePartition.uniform(0, 0.2, 4), 2, zero)
    assert not traj.u.any() and not traj.v.any() and not traj.p.any()


def test_crank_nicolson_kinematics_for_k1():
    co = CO.replace(alpha=0.0)
    ops = operators(3, 1, co)
    rng = np.random.default_rng(2)
    fu = vector_free_dofs(ops.space_u)
    init = [np.zeros(2 * ops.space_u.n_dofs) for _ in range(2)] + [np.zeros(ops.space_p.n_dofs)]
    for z in init[:2]:
        z[fu] = rng.standard_normal(fu.size)
    traj = march(ops, co, TimePartition.uniform(0, 0.5, 5), 1, init)
    tau = 0.1
    for n in range(5):
        np.testing.assert_allclose((traj.u[n, 1] - traj.u[n, 0]) / tau,
                                   0.5 * (traj.v[n, 0] + traj.v[n, 1]), atol=1e-10)


def test_slab_rhs_loads():
    ops = operators(3, 1)
    system = assemble_slab_matrix(ops, temporal_coupling(2, 0.1), CO)
    zero_start = np.zeros(system.node_size)
    assert not assemble_slab_rhs(system, 0.0, 0.1, zero_start, LoadAssembler(ops, CO, None, None)).any()
    # f = (c1 t^2, c2), g = t: temporal degree <= k is integrated exactly
    f = lambda x1, x2, t: (0 * x1 + 3.0 * t**2, 0 * x1 - 1.0)
    g = lambda x1, x2, t: 0 * x1 + t
    rhs = assemble_slab_rhs(system, 1.0, 1.1, zero_start, LoadAssembler(ops, CO, f, g)).reshape(2, -1)
    nu = 2 * ops.n_u
    # int chi_j over the domain, from the unconstrained mass matrices
    su, spp = ops.space_u, ops.space_p
    ones_u = (assemble_mass(su) @ np.ones(su.n_dofs))[su.free_dofs]
    ones_p = (assemble_mass(spp) @ np.ones(spp.n_dofs))[spp.free_dofs]
    g5 = gauss_legendre(5)
    t = 1.05 + 0.05 * g5.nodes
    psi = lagrange_matrix(gauss_legendre(2).nodes, g5.nodes)
    for i in range(2):
        w = 0.05 * g5.weights * psi[:, i]
        np.testing.assert_allclose(rhs[i, :nu], 0.0)
        np.testing.assert_allclose(rhs[i, nu:nu + ops.n_u], CO.rho * (w @ (3 * t**2)) * ones_u, rtol=1e-12)
        np.testing.assert_allclose(rhs[i, nu + ops.n_u:2 * nu], -CO.rho * w.sum() * ones_u, rtol=1e-12)
        np.testing.assert_allclose(rhs[i, 2 * nu:], (w @ t) * ones_p, rtol=1e-12)


@pytest.mark.parametrize("k", [1, 2])
def test_polynomial_solution_reproduced(poly_case, k):
    # temporal degree k: exact in time, bubble exact in space
    case = poly_case
    case.Tu = case.Tu.cutdeg(k)
    case.Tp = case.Tp.cutdeg(k)
    co = case.coeffs
    ops = operators(3, 2, co)
    init = discrete_initial_values(case.initial_traces(0.0), ops, co, "nodal")
    traj = march(ops, co, TimePartition.uniform(0.0, 0.3, 3), k, init, case.rhs_f, case.rhs_g)
    X = ops.space_u.node_coords
    Xp = ops.space_p.node_coords
    for t in (0.05, 0.17, 0.3):
        u, v, p = traj.at(t)
        ex = case.exact_fields(X[:, 0], X[:, 1], t)
        exp = case.exact_fields(Xp[:, 0], Xp[:, 1], t)
        np.testing.assert_allclose(u, np.concatenate(ex.u), atol=1e-11)
        np.testing.assert_allclose(v, np.concatenate(ex.v), atol=1e-10)
        np.testing.assert_allclose(p, exp.p, atol=1e-11)


def test_ritz_initial_values_exact_for_discrete_fields(poly_case):
    co = poly_case.coeffs
    ops = operators(2, 2, co)
    ritz = discrete_initial_values(poly_case.initial_traces(0.2), ops, co, "ritz")
    nodal = discrete_initial_values(poly_case.initial_traces(0.2), ops, co, "nodal")
    for a, b in zip(ritz, nodal):
        np.testing.assert_allclose(a, b, atol=1e-12)
    with pytest.raises(ValueError):
        discrete_initial_values(poly_case.initial_traces(), ops, co, "exact")


@pytest.fixture(scope="module")
def small_traj():
    ops = operators(2, 1)
    rng = np.random.default_rng(5)
    fu = vector_free_dofs(ops.space_u)
    init = [np.zeros(2 * ops.space_u.n_dofs), np.zeros(2 * ops.space_u.n_dofs), np.zeros(ops.space_p.n_dofs)]
    init[0][fu] = rng.standard_normal(fu.size)
    init[2][ops.space_p.free_dofs] = rng.standard_normal(ops.n_p)
    return march(ops, CO, TimePartition.uniform(1.0, 1.2, 4), 2, init)


def test_trajectory_continuity_and_nodes(small_traj):
    tr = small_traj
    for n in range(1, tr.n_slabs):
        left, right = tr.at(tr.partition.boundaries[n]), tr.at(tr.partition.boundaries[n], "right")
        for a, b in zip(left, right):
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-12 * np.abs(a).max())
        np.testing.assert_array_equal(tr.node_values(n)[0], tr.u[n, 0])
    u, v, p = tr.slab_values(1, np.array([1.06, 1.07]))
    assert u.shape == (2, tr.u.shape[-1]) and p.shape == (2, tr.p.shape[-1])


@pytest.mark.parametrize("fmt", ["npz", "csv"])
def test_trajectory_save(small_traj, tmp_path, fmt):
    path = tmp_path / f"traj.{fmt}"
    small_traj.save(str(path), fmt)
    assert path.stat().st_size > 0
    if fmt == "npz":
        back = Trajectory.load(str(path))
        np.testing.assert_array_equal(back.u, small_traj.u)
        np.testing.assert_array_equal(back.partition.boundaries, small_traj.partition.boundaries)
        assert back.k == 2
    else:
        lines = path.read_text().splitlines()
        assert lines[1] == "slab,node,field,values"
        assert len(lines) == 2 + 4 * 3 * 3
    with pytest.raises(ValueError):
        small_traj.save(str(tmp_path / "x"), "hdf5")


def test_energy_norm_equivalence():
    ops = operators(3, 2)
    rng = np.random.default_rng(11)
    zero_p = np.zeros(ops.space_p.n_dofs)
    nfull = 2 * ops.space_u.n_dofs
    fu = vector_free_dofs(ops.space_u)
    assert energy(np.zeros(nfull), np.zeros(nfull), zero_p, ops, CO) == (0.0, 0.0, 0.0)
    ratios = []
    for _ in range(100):
        u, v = np.zeros(nfull), np.zeros(nfull)
        u[fu], v[fu] = rng.standard_normal((2, fu.size)) * rng.uniform(0.01, 100, 2)[:, None]
        e, _, plain = energy(u, v, zero_p, ops, CO)
        ratios.append(e / plain)
    # bounded above and away from zero, with bounds set by rho, mu and lam
    lo = np.sqrt(0.5 * min(CO.rho, CO.mu))
    hi = np.sqrt(0.5 * max(CO.rho, 2 * CO.mu + 2 * CO.lam))
    assert lo <= min(ratios) and max(ratios) <= hi


def test_single_slab_equals_direct_solve(poly_case):
    co = poly_case.coeffs
    ops = operators(2, 2, co)
    init = discrete_initial_values(poly_case.initial_traces(0.0), ops, co, "nodal")
    traj = march(ops, co, TimePartition.uniform(0.0, 0.1, 1), 2, init, poly_case.rhs_f, poly_case.rhs_g)
    assert traj.meta["factorizations"] == 1
    system = assemble_slab_matrix(ops, temporal_coupling(2, 0.1), co)
    fu, fp = vector_free_dofs(ops.space_u), ops.space_p.free_dofs
    start = np.concatenate([init[0][fu], init[1][fu], init[2][fp]])
    rhs = assemble_slab_rhs(system, 0.0, 0.1, start, LoadAssembler(ops, co, poly_case.rhs_f, poly_case.rhs_g))
    x = spla.spsolve(system.matrix, rhs).reshape(2, -1)
    nu = 2 * ops.n_u
    np.testing.assert_allclose(traj.u[0, 1:][:, fu], x[:, :nu], atol=1e-10)
    np.testing.assert_allclose(traj.p[0, 1:][:, fp], x[:, 2 * nu:], atol=1e-10)


def test_march_factorizes_once(ops22):
    zero = (np.zeros(2 * ops22.space_u.n_dofs),) * 2 + (np.zeros(ops22.space_p.n_dofs),)
    ones = lambda x1, x2, t: (0 * x1 + 1.0, 0 * x1)
    traj = march(ops22, CO, TimePartition.uniform(0, 0.5, 10), 2, zero, f=ones)
    assert traj.meta["factorizations"] == 1 and traj.v.any()


def test_coupling_blocks_are_transposes(ops22):
    k = 2
    c = temporal_coupling(k, 0.05)
    system = assemble_slab_matrix(ops22, c, CO)
    M = system.matrix.tocsr()
    nu, _, npp = system.block_sizes
    node = system.node_size
    for i in range(k):
        for j in range(k):
            mom_p = M[i * node + nu:i * node + 2 * nu, j * node + 2 * nu:(j + 1) * node]
            flow_u = M[i * node + 2 * nu:(i + 1) * node, j * node:j * node + nu]
            a, b = c.a[i, j + 1], c.b[i, j + 1]
            assert abs(mom_p / (-CO.alpha * b) - (flow_u / (CO.alpha * a)).T).max() < 1e-12


def test_energy_of_pure_velocity_state():
    ops = operators(2, 2)
    fu = vector_free_dofs(ops.space_u)
    v = np.zeros(2 * ops.space_u.n_dofs)
    v[fu] = np.random.default_rng(4).standard_normal(fu.size)
    co = CO.replace(rho=2.5)
    elastic, pressure, _ = energy(np.zeros_like(v), v, np.zeros(ops.space_p.n_dofs), ops, co)
    assert elastic**2 == pytest.approx(0.5 * co.rho * v[fu] @ ops.Mu2 @ v[fu], rel=1e-13)
    assert pressure == 0.0
