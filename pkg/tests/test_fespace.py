from __future__ import annotations

import numpy as np
import pytest

from unfitted_oseen.errors import MeshError
from unfitted_oseen.fespace import (
    DofMap,
    NodeGrid,
    TensorBasis,
    eval_field,
    gll_nodes,
    interpolate,
    locate_points,
)
from unfitted_oseen.geometry import circle_markers, fit_periodic_spline
from unfitted_oseen.mesh import StructuredMesh, classify


def disk_classification(nc=8):
    return classify(StructuredMesh(nc), fit_periodic_spline(circle_markers((0.5, 0.55), 0.2, 0.02)))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_gll_nodes(k):
    x = gll_nodes(k)
    assert x[0] == 0.0 and x[-1] == 1.0 and np.all(np.diff(x) > 0)
    if k >= 2:
        # interior nodes are roots of P_k'(2x - 1)
        dP = np.polynomial.legendre.Legendre.basis(k).deriv()
        assert np.allclose(dP(2 * x[1:-1] - 1), 0.0, atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_basis_is_nodal_and_sums_to_one(k):
    b = TensorBasis(k)
    x = gll_nodes(k)
    assert np.allclose(b.eval1d(x), np.eye(k + 1), atol=1e-13)
    t = np.linspace(0, 1, 17)
    assert np.allclose(b.eval1d(t).sum(axis=1), 1.0)
    assert np.allclose(b.eval1d(t, 1).sum(axis=1), 0.0, atol=1e-11)
    xi, eta = np.meshgrid(t, t)
    phi = b.eval2d(xi.ravel(), eta.ravel())
    assert phi.shape == (t.size**2, (k + 1) ** 2)
    assert np.allclose(phi.sum(axis=1), 1.0)


@pytest.mark.parametrize("k", [2, 3])
def test_local_index_ordering(k):
    b = TensorBasis(k)
    x = gll_nodes(k)
    ix, iy = 1, k  # node a = iy * (k + 1) + ix
    a = iy * (k + 1) + ix
    assert b.eval2d(np.array([x[ix]]), np.array([x[iy]]))[0, a] == pytest.approx(1.0)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_interpolation_reproduces_polynomials_and_derivatives(k):
    mesh = StructuredMesh(4)
    f = lambda X: X[:, 0] ** k - 2 * X[:, 0] * X[:, 1] ** (k - 1) + 0.5  # noqa: E731
    fx = lambda X: k * X[:, 0] ** (k - 1) - 2 * X[:, 1] ** (k - 1)  # noqa: E731
    fy = lambda X: -2 * (k - 1) * X[:, 0] * X[:, 1] ** (k - 2)  # noqa: E731
    u = interpolate((f, f), None, k, mesh=mesh)
    pts = np.random.default_rng(0).random((200, 2))
    assert np.allclose(eval_field(u, 1, pts)[:, 0], f(pts), atol=1e-12)
    assert np.allclose(eval_field(u, 2, pts, (1, 0))[:, 0], fx(pts), atol=1e-10)
    assert np.allclose(eval_field(u, 2, pts, (0, 1))[:, 0], fy(pts), atol=1e-10)


def test_interpolation_converges_at_order_k_plus_one():
    f = lambda X: np.sin(3 * X[:, 0]) * np.exp(X[:, 1])  # noqa: E731
    pts = np.random.default_rng(1).random((500, 2))
    errs = []
    for nc in (4, 8, 16):
        u = interpolate((f, f), None, 3, mesh=StructuredMesh(nc))
        errs.append(np.abs(eval_field(u, 1, pts)[:, 0] - f(pts)).max())
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(rates > 3.5)


def test_node_grid_connectivity():
    g = NodeGrid(StructuredMesh(3), 2)
    assert g.n1 == 7 and g.n_nodes == 49
    conn = g.connectivity
    assert conn.shape == (9, 9)
    # neighbouring elements share a node column
    assert set(conn[0][2::3]) == set(conn[1][0::3])
    assert len(g.boundary_nodes()) == 4 * 6
    xy = g.coords()
    b = xy[g.boundary_nodes()]
    assert np.all(np.any(np.isclose(b, 0.0) | np.isclose(b, 1.0), axis=1))


def test_dofmap_layout_and_split_gather_roundtrip():
    c = disk_classification()
    dm = DofMap.build(c, 2)
    n1, n2 = dm.n_u
    assert dm.vel_offsets == (0, 2 * n1)
    assert dm.pres_offsets[0] == 2 * (n1 + n2)
    assert dm.multiplier == dm.size - 1
    # phase-1 velocity lives on the cover of phase 1 only
    g = NodeGrid(c.mesh, 2)
    active = np.zeros(g.n_nodes, dtype=bool)
    active[g.connectivity[c.cover(1)].ravel()] = True
    assert np.array_equal(dm.vel[0] >= 0, active)
    x = np.random.default_rng(0).random(dm.size)
    x[-1] = 0.0
    u, p = dm.split(x)
    assert np.array_equal(dm.gather(u, p), x)
    # Dirichlet dofs: phase-2 velocity on the boundary
    d = dm.dirichlet_dofs()
    assert len(d) == 2 * len(g.boundary_nodes())
    assert np.all(d >= dm.vel_offsets[1]) and np.all(d < dm.pres_offsets[0])


def test_extension_by_zero_outside_cover():
    c = disk_classification()
    one = lambda X: np.ones(len(X))  # noqa: E731
    u = interpolate((one, one), c, 2)
    g = NodeGrid(c.mesh, 2)
    for i in (1, 2):
        inside = np.unique(g.connectivity[c.cover(i)].ravel())
        outside = np.setdiff1d(np.arange(g.n_nodes), inside)
        assert np.all(u.values[i - 1][inside] == 1.0)
        assert np.all(u.values[i - 1][outside] == 0.0)
    assert len(c.interior(1)) > 0  # so phase 2 has nodes outside its cover


def test_locate_points_rejects_outside():
    mesh = StructuredMesh(4)
    e, xi, eta = locate_points(mesh, np.array([[1.0, 1.0], [0.0, 0.0], [0.3, 0.6]]))
    assert list(e) == [15, 0, mesh.element_index(1, 2)]
    assert xi[0] == pytest.approx(1.0) and eta[2] == pytest.approx(0.4)
    with pytest.raises(MeshError):
        locate_points(mesh, np.array([[1.1, 0.5]]))
