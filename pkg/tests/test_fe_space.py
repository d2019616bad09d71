import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgbiot.fe_space import (
    CellQuadrature,
    StructuredQuadMesh,
    build_space,
    dirichlet_dofs,
    eval_basis,
    interpolate_nodal,
)


@pytest.mark.parametrize("n, s, total, interior", [(4, 2, 81, 49), (4, 3, 169, 121), (1, 1, 4, 0)])
def test_dof_counts(n, s, total, interior):
    space = build_space(n, s)
    assert space.n_dofs == total
    assert space.n_free == interior == space.free_dofs.size
    assert dirichlet_dofs(space).size == total - interior


def test_mesh():
    mesh = StructuredQuadMesh(4)
    assert mesh.h == pytest.approx(np.sqrt(2) / 4)
    assert mesh.refine().n == 8
    assert mesh.cell_origin(5) == (0.25, 0.25)
    with pytest.raises(ValueError):
        StructuredQuadMesh(0)


@settings(max_examples=30)
@given(n=st.integers(1, 6), s=st.integers(1, 5))
def test_cell_dofs_consistent_with_coordinates(n, s):
    space = build_space(n, s)
    dofs = space.cell_dofs
    assert dofs.shape == (n * n, (s + 1) ** 2)
    assert np.unique(dofs).size == space.n_dofs
    X = space.node_coords
    for cell in {0, n * n - 1, (n * n) // 2}:
        ox, oy = space.mesh.cell_origin(cell)
        pts = X[dofs[cell]]
        assert np.all(pts[:, 0] >= ox - 1e-14) and np.all(pts[:, 0] <= ox + 1 / n + 1e-14)
        assert np.all(pts[:, 1] >= oy - 1e-14) and np.all(pts[:, 1] <= oy + 1 / n + 1e-14)
    # boundary DoFs are exactly those on the boundary of the square
    on_edge = np.isclose(X, 0).any(axis=1) | np.isclose(X, 1).any(axis=1)
    np.testing.assert_array_equal(on_edge, space.boundary_mask)


def test_corner_cardinality():
    space = build_space(1, 1)
    values, _ = eval_basis(space, 0, (0.0, 0.0))
    np.testing.assert_allclose(values, [1, 0, 0, 0])
    with pytest.raises(IndexError):
        eval_basis(space, 1, (0.0, 0.0))


@settings(max_examples=30)
@given(s=st.integers(1, 5), xi=st.floats(0, 1), eta=st.floats(0, 1))
def test_partition_of_unity(s, xi, eta):
    values, grads = eval_basis(build_space(3, s), 4, (xi, eta))
    assert values.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(grads.sum(axis=0), 0.0, atol=1e-9)


@pytest.mark.parametrize("s", [1, 2, 4])
def test_linear_gradient_reproduced(s):
    space = build_space(3, s)
    cq = CellQuadrature(space, s + 2)
    g1, g2 = cq.gradients(interpolate_nodal(space, lambda x, y: x))
    np.testing.assert_allclose(g1, 1.0, atol=1e-11)
    np.testing.assert_allclose(g2, 0.0, atol=1e-11)


def test_interpolation_examples():
    space = build_space(4, 2)
    np.testing.assert_array_equal(interpolate_nodal(space, lambda x, y: 1.0), np.ones(81))
    cq = CellQuadrature(space, 5)
    vals = cq.values(interpolate_nodal(space, lambda x, y: x * y))
    np.testing.assert_allclose(vals, cq.x1 * cq.x2, atol=1e-14)


def test_interpolation_error_rate():
    f = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
    errs = []
    for n in (4, 8, 16):
        space = build_space(n, 2)
        cq = CellQuadrature(space, 8)
        e = cq.values(interpolate_nodal(space, f)) - f(cq.x1, cq.x2)
        errs.append(np.sqrt(cq.integrate(e**2)))
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    np.testing.assert_allclose(rates, 3.0, atol=0.1)


def test_quadrature_integrates_and_batches():
    space = build_space(3, 3)
    cq = CellQuadrature(space, 5)
    assert cq.integrate(np.ones_like(cq.x1)) == pytest.approx(1.0)
    assert cq.integrate(cq.x1**3 * cq.x2**2) == pytest.approx(1 / 12)
    rng = np.random.default_rng(1)
    c = rng.standard_normal((2, 3, space.n_dofs))
    batched = cq.values(c)
    assert batched.shape == (2, 3) + cq.x1.shape
    np.testing.assert_allclose(batched[1, 2], cq.values(c[1, 2]))
