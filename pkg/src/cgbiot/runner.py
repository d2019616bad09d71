"""Convergence studies and the property-verification suite."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .assembly import BiotCoefficients, SpatialOperators, assemble_operators, elliptic_projection
from .config import RunConfig
from .diagnostics import QUANTITIES, ErrorEvaluator, ErrorReport, LevelErrors
from .fe_space import CellQuadrature, build_space
from .manufactured import ManufacturedCase
from .quadrature import gauss_legendre, gauss_lobatto
from .reference import Check
from .slab_solver import (
    SolverError,
    Trajectory,
    assemble_slab_matrix,
    discrete_initial_values,
    energy,
    march,
)
from .time_basis import TimePartition, interpolate_gl, lagrange_matrix, project_l2_time, temporal_coupling

log = logging.getLogger(__name__)


@dataclass
class LevelRun:
    ops: SpatialOperators
    trajectory: Trajectory
    case: ManufacturedCase
    seconds: float


def setup(config: RunConfig, level: int):
    n, _ = config.level_sizes(level)
    coeffs = config.coefficients()
    su, spp = build_space(n, config.r + 1), build_space(n, config.r)
    return coeffs, assemble_operators(su, spp, coeffs)


def run_level(config: RunConfig, level: int, coupling_sign: float = 1.0) -> LevelRun:
    """Solve the manufactured problem on one refinement level."""
    start = time.perf_counter()
    coeffs, ops = setup(config, level)
    n, tau = config.level_sizes(level)
    case = ManufacturedCase(coeffs=coeffs, displacement_mode=config.displacement_mode,
                            t_start=config.t_start)
    init = discrete_initial_values(case.initial_traces(), ops, coeffs, config.initial_data)
    part = TimePartition.uniform(config.t_start, config.t_end, config.n_slabs(level))
    system = assemble_slab_matrix(ops, temporal_coupling(config.k, part.tau), coeffs,
                                  config.solver, coupling_sign=coupling_sign)
    traj = march(ops, coeffs, part, config.k, init, case.rhs_f, case.rhs_g, system=system)
    traj.meta.update(r=config.r, n=n, tau=tau)
    return LevelRun(ops, traj, case, time.perf_counter() - start)


def level_errors(config: RunConfig, run: LevelRun, level: int) -> LevelErrors:
    ev = ErrorEvaluator(run.trajectory, run.ops.space_u, run.ops.space_p, run.case)
    errs = ev.all_norms(M=config.M, n_time_quad=config.time_quad, threads=config.threads)
    n, tau = config.level_sizes(level)
    return LevelErrors(level, tau, run.ops.space_u.mesh.h, errs)


def run_convergence(config: RunConfig, coupling_sign: float = 1.0) -> ErrorReport:
    report = ErrorReport(config.k, config.r, notes={
        "displacement": f"u = phi * {config.displacement_mode}",
        "lame": "plane strain",
        "initial_data": config.initial_data,
    })
    for level in range(config.levels):
        try:
            run = run_level(config, level, coupling_sign)
        except SolverError as exc:
            raise SolverError(f"level {level}: {exc}") from exc
        report.levels.append(level_errors(config, run, level))
        log.info("level %d solved in %.1fs", level, run.seconds)
    return report


# ---------------------------------------------------------------- verification


def _check_quadrature(max_k: int = 8) -> Check:
    worst = 0.0
    for k in range(1, max_k + 1):
        for rule in (gauss_lobatto(k + 1), gauss_legendre(k)):
            for m in range(2 * k):
                exact = (1 + (-1) ** m) / (m + 1)
                got = rule.weights @ rule.nodes**m
                worst = max(worst, abs(got - exact) / max(abs(exact), 1.0))
    return Check("quadrature exactness deg <= 2k-1", worst < 1e-12, f"max rel err {worst:.2e}")


def _check_gauss_projection(rng, k_max: int = 4, samples: int = 100) -> Check:
    """L2 projection onto P_{k-1} equals Gauss-point interpolation for w in P_k."""
    worst = 0.0
    g_ref = gauss_legendre(12)
    for k in range(1, k_max + 1):
        for _ in range(samples // k_max):
            w = interpolate_gl(rng.standard_normal(k + 1), (0.0, 1.0))
            pw = project_l2_time(w)
            # independent route: normal equations in the Legendre basis on [0, 1]
            t = 0.5 * (g_ref.nodes + 1)
            wt = 0.5 * g_ref.weights
            Q = np.polynomial.legendre.legvander(2 * t - 1, k - 1)
            c = np.linalg.solve(Q.T @ (wt[:, None] * Q), Q.T @ (wt * w(t)))
            worst = max(worst, np.max(np.abs(Q @ c - pw(t))))
    return Check("L2 projection == Gauss interpolant", worst < 1e-12, f"max dev {worst:.2e}")


def _check_inverse_inequality(rng, k: int = 3) -> Check:
    ratios = []
    g = gauss_legendre(k + 2)
    dense = np.linspace(-1, 1, 2001)
    nodes = gauss_lobatto(k + 1).nodes
    for tau in (0.1, 0.05, 0.025):
        worst = 0.0
        for _ in range(50):
            vals = rng.standard_normal(k + 1)
            sup = np.abs(lagrange_matrix(nodes, dense) @ vals).max()
            l2 = math.sqrt(0.5 * tau * (g.weights @ (lagrange_matrix(nodes, g.nodes) @ vals) ** 2))
            worst = max(worst, sup / (tau**-0.5 * l2))
        ratios.append(worst)
    # the sup/L2 ratio of a reference polynomial is scale-free
    ok = max(ratios) < 10.0 * (k + 1) and np.ptp(ratios) < 0.5 * max(ratios)
    return Check("Linf-L2 inverse inequality in time", ok, "ratios " + ", ".join(f"{x:.3f}" for x in ratios))


def _check_operators() -> Check:
    coeffs = BiotCoefficients()
    ops = assemble_operators(build_space(3, 2), build_space(3, 1), coeffs)
    sym = max(abs(M - M.T).max() / abs(M).max() for M in (ops.Mu, ops.Mp, ops.A, ops.B))
    eig = min(np.linalg.eigvalsh(M.toarray()).min() for M in (ops.A, ops.B, ops.Mu, ops.Mp))
    return Check("operator symmetry / definiteness", sym < 1e-13 and eig > 0,
                 f"asym {sym:.1e}, min eig {eig:.2e}")


def _fd_second(f, x1, x2, t, i, j, d):
    """Central-difference ``d_i d_j f`` in space."""
    e = np.eye(2) * d
    return (f(x1 + e[i, 0] + e[j, 0], x2 + e[i, 1] + e[j, 1], t)
            - f(x1 + e[i, 0] - e[j, 0], x2 + e[i, 1] - e[j, 1], t)
            - f(x1 - e[i, 0] + e[j, 0], x2 - e[i, 1] + e[j, 1], t)
            + f(x1 - e[i, 0] - e[j, 0], x2 - e[i, 1] - e[j, 1], t)) / (4 * d * d)


def manufactured_residuals(case: ManufacturedCase, x1, x2, t, d: float = 1e-4):
    """PDE residuals of the exact fields and loads, derivatives by finite differences."""
    co = case.coeffs

    def u(a, b, s):
        return np.array(case.exact_fields(a, b, s).u)

    def p(a, b, s):
        return case.exact_fields(a, b, s).p

    def div_u(a, b, s):
        return ((u(a + d, b, s)[0] - u(a - d, b, s)[0]) + (u(a, b + d, s)[1] - u(a, b - d, s)[1])) / (2 * d)

    H = [[_fd_second(u, x1, x2, t, i, j, d) for j in range(2)] for i in range(2)]
    lap_u = H[0][0] + H[1][1]
    div_stress = np.array([co.mu * lap_u[c] + (co.lam + co.mu) * (H[c][0][0] + H[c][1][1])
                           for c in range(2)])
    grad_p = np.array([(p(x1 + d, x2, t) - p(x1 - d, x2, t)) / (2 * d),
                       (p(x1, x2 + d, t) - p(x1, x2 - d, t)) / (2 * d)])
    utt = (u(x1, x2, t + d) - 2 * u(x1, x2, t) + u(x1, x2, t - d)) / d**2
    rho_f = co.rho * np.array(case.rhs_f(x1, x2, t))
    momentum = co.rho * utt - div_stress + co.alpha * grad_p - rho_f

    pt = (p(x1, x2, t + d) - p(x1, x2, t - d)) / (2 * d)
    div_ut = (div_u(x1, x2, t + d) - div_u(x1, x2, t - d)) / (2 * d)
    K = co.K
    div_flux = sum(K[i, j] * _fd_second(p, x1, x2, t, i, j, d) for i in range(2) for j in range(2))
    flow = co.c0 * pt + co.alpha * div_ut - div_flux - case.rhs_g(x1, x2, t)
    scale = max(np.abs(rho_f).max(), np.abs(div_stress).max(), 1.0)
    return momentum / scale, flow / scale


def _check_manufactured_residual(rng, n_samples: int = 1000) -> Check:
    x1, x2 = rng.uniform(0, 1, n_samples), rng.uniform(0, 1, n_samples)
    t = rng.uniform(1, 2, n_samples)
    mom, flow = manufactured_residuals(ManufacturedCase(), x1, x2, t)
    worst = max(np.abs(mom).max(), np.abs(flow).max())
    return Check("manufactured PDE residual", worst < 1e-4, f"max scaled residual {worst:.2e}")


def collocation_defect(traj: Trajectory) -> float:
    """Max over slabs of ``|dt u - v|/max|v|`` at the Gauss points."""
    g = gauss_legendre(traj.k)
    worst = 0.0
    for n in range(traj.n_slabs):
        a, b = traj.partition.slab(n)
        tg = 0.5 * (a + b) + 0.5 * (b - a) * g.nodes
        du, _, _ = traj.slab_values(n, tg, derivative=True)
        _, v, _ = traj.slab_values(n, tg)
        worst = max(worst, np.abs(du - v).max() / max(np.abs(v).max(), 1e-300))
    return worst


def continuity_defect(traj: Trajectory) -> float:
    worst = 0.0
    for n in range(1, traj.n_slabs):
        t = traj.partition.boundaries[n]
        left, right = traj.at(t, "left"), traj.at(t, "right")
        for a, b in zip(left, right):
            worst = max(worst, np.abs(a - b).max() / max(np.abs(a).max(), 1e-300))
    return worst


def homogeneous_energies(coeffs: BiotCoefficients, n: int = 4, r: int = 2, k: int = 2,
                         n_slabs: int = 20, tau: float = 0.05, coupling_sign: float = 1.0):
    """Node energies of a forcing-free run started from manufactured traces."""
    su, spp = build_space(n, r + 1), build_space(n, r)
    ops = assemble_operators(su, spp, coeffs)
    case = ManufacturedCase(coeffs=coeffs)
    init = discrete_initial_values(case.initial_traces(), ops, coeffs)
    part = TimePartition.uniform(1.0, 1.0 + n_slabs * tau, n_slabs)
    system = assemble_slab_matrix(ops, temporal_coupling(k, tau), coeffs, coupling_sign=coupling_sign)
    traj = march(ops, coeffs, part, k, init, system=system)
    return np.array([energy(*traj.node_values(m), ops, coeffs) for m in range(n_slabs + 1)])


def verify_properties(config: RunConfig | None = None, coupling_sign: float = 1.0,
                      seed: int = 0) -> list[Check]:
    """Run the invariant suite; ``coupling_sign=-1`` injects a coupling fault."""
    config = config or RunConfig(k=2, r=2)
    rng = np.random.default_rng(seed)
    checks = [
        _check_quadrature(),
        _check_gauss_projection(rng),
        _check_inverse_inequality(rng),
        _check_operators(),
        _check_manufactured_residual(rng),
    ]
    run = run_level(RunConfig(k=2, r=2, levels=2), 1, coupling_sign)
    c = collocation_defect(run.trajectory)
    checks.append(Check("collocation dt u = v at Gauss points", c < 1e-9, f"max rel defect {c:.2e}"))
    c = continuity_defect(run.trajectory)
    checks.append(Check("continuity at time nodes", c < 1e-12, f"max rel jump {c:.2e}"))

    base = config.coefficients()
    decoupled = homogeneous_energies(base.replace(alpha=0.0), coupling_sign=coupling_sign)
    wave, heat = decoupled[:, 0], decoupled[:, 1]
    drift = np.abs(wave - wave[0]).max() / wave[0]
    checks.append(Check("elastic energy conserved (alpha=0, f=0)", drift < 1e-9, f"drift {drift:.2e}"))
    inc = np.diff(heat).max()
    checks.append(Check("pressure energy non-increasing (alpha=0, g=0)", inc <= 1e-14 * heat[0],
                        f"max increment {inc:.2e}"))
    en = homogeneous_energies(base, coupling_sign=coupling_sign)
    total = en[:, 0] ** 2 + en[:, 1] ** 2
    inc = np.diff(total).max()
    checks.append(Check("coupled energy dissipation (f=g=0)", inc <= 1e-12 * total[0],
                        f"max increment {inc:.2e}"))

    # k = r = 2 is fine enough for a coupling fault to dominate the discretization error
    small = RunConfig(k=2, r=2, levels=2, M=10)
    report = run_convergence(small, coupling_sign)
    orders = [report.eocs("L2L2", q)[1] for q in QUANTITIES]
    ok = all(2.7 <= o <= 3.3 for o in orders)
    checks.append(Check("k=r=2 convergence smoke test", ok, "EOC " + ", ".join(f"{o:.2f}" for o in orders)))
    return checks


# ---------------------------------------------------------------- elliptic projections


@dataclass
class ProjectionErrors:
    h: float
    scalar_l2: float
    scalar_h1: float
    vector_l2: float


def projection_errors(r: int, n: int, coeffs: BiotCoefficients | None = None) -> ProjectionErrors:
    """Ritz-projection errors of ``sin(pi x1) sin(pi x2)`` on an ``n x n`` mesh.

    The scalar projection uses degree ``r`` and the diffusion form, the
    vector one (both components equal) degree ``r+1`` and the elasticity form.
    """
    coeffs = coeffs or BiotCoefficients()
    w = math.pi

    def val(x1, x2):
        return np.sin(w * x1) * np.sin(w * x2)

    def grad(x1, x2):
        return (w * np.cos(w * x1) * np.sin(w * x2), w * np.sin(w * x1) * np.cos(w * x2))

    sp_ = build_space(n, r)
    p = elliptic_projection(grad, sp_, "diffusion", coeffs)
    cq = CellQuadrature(sp_, r + 3)
    g1, g2 = cq.gradients(p)
    e1, e2 = grad(cq.x1, cq.x2)
    scalar_l2 = math.sqrt(cq.integrate((cq.values(p) - val(cq.x1, cq.x2)) ** 2))
    scalar_h1 = math.sqrt(cq.integrate((g1 - e1) ** 2 + (g2 - e2) ** 2))

    su = build_space(n, r + 1)
    u = elliptic_projection(lambda x1, x2: [list(grad(x1, x2))] * 2, su, "elasticity", coeffs)
    cu = CellQuadrature(su, r + 4)
    ex = val(cu.x1, cu.x2)
    m = su.n_dofs
    vector_l2 = math.sqrt(cu.integrate((cu.values(u[:m]) - ex) ** 2 + (cu.values(u[m:]) - ex) ** 2))
    return ProjectionErrors(su.mesh.h, scalar_l2, scalar_h1, vector_l2)


def projection_rates(r: int, n0: int = 4, refinements: int = 3):
    """Errors on ``refinements + 1`` meshes and the observed rates between them."""
    errs = [projection_errors(r, n0 * 2**i) for i in range(refinements + 1)]
    rates = {
        name: [math.log2(getattr(a, name) / getattr(b, name)) for a, b in zip(errs, errs[1:])]
        for name in ("scalar_l2", "scalar_h1", "vector_l2")
    }
    return errs, rates
