from __future__ import annotations

import numpy as np
import pytest

from unfitted_oseen.errors import MeshError
from unfitted_oseen.geometry import circle_markers, curve_markers, fit_periodic_spline
from unfitted_oseen.mesh import HORIZONTAL, VERTICAL, StructuredMesh, check_mesh_assumptions, classify

C = np.array([0.5, 0.75])
R = 0.15


def disk(nc, center=C, radius=R):
    return classify(StructuredMesh(nc), fit_periodic_spline(circle_markers(center, radius, 0.25 / nc)))


def sampled_cut_set(c, n=200_000):
    """Cells visited by a dense sampling of the spline (independent of the crossing walk).

    Samples within 1e-9 of a grid line are ignored since their cell is a
    matter of convention.
    """
    l = (np.arange(n) + 0.5) * c.spline.period / n
    p = c.spline.eval(l)
    h = c.mesh.h
    r = p / h
    keep = np.all(np.abs(r - np.round(r)) > 1e-9 / h, axis=1)
    i = np.clip(np.floor(r[keep, 0]).astype(int), 0, c.mesh.nc - 1)
    j = np.clip(np.floor(r[keep, 1]).astype(int), 0, c.mesh.nc - 1)
    return set((j * c.mesh.nc + i).tolist())


def assert_cut_set_consistent(c):
    """Every sampled cell is cut; cut cells missed by sampling hold only tiny arcs."""
    cut = set(c.cut_elements().tolist())
    seen = sampled_cut_set(c)
    assert seen <= cut
    for e in cut - seen:
        assert sum(a.l1 - a.l0 for a in c.arcs[e]) < 1e-4 * c.mesh.h


def test_locate_tie_rule():
    m = StructuredMesh(4)
    # x on a grid line goes to the left cell, y on a grid line to the upper cell
    assert m.locate([0.5, 0.1])[0] == m.element_index(1, 0)
    assert m.locate([0.1, 0.5])[0] == m.element_index(0, 2)
    assert m.locate([0.6, 0.6])[0] == m.element_index(2, 2)


def test_interior_edges_count_and_orientation():
    m = StructuredMesh(5)
    e = m.interior_edges()
    assert len(e) == 2 * 5 * 4
    v = e[e[:, 2] == VERTICAL]
    hz = e[e[:, 2] == HORIZONTAL]
    assert np.all(v[:, 1] - v[:, 0] == 1)
    assert np.all(hz[:, 1] - hz[:, 0] == 5)


@pytest.mark.parametrize("nc", [16, 20, 32])
def test_cut_cells_match_dense_sampling(nc):
    c = disk(nc)
    assert_cut_set_consistent(c)
    if nc != 20:  # at nc = 20 the circle is tangent to four grid lines
        assert set(c.cut_elements().tolist()) == sampled_cut_set(c)


@pytest.mark.parametrize("nc", [16, 32])
def test_phases_and_covers(nc):
    c = disk(nc)
    centers = c.mesh.element_center(np.arange(c.mesh.n_elements))
    inside = np.linalg.norm(centers - C, axis=1) < R
    unc = ~c.cut
    assert np.array_equal(c.phase[unc] == 1, inside[unc])
    assert np.all(c.phase[c.cut] == 0)
    assert np.array_equal(c.in_cover[0], c.cut | (c.phase == 1))
    assert np.array_equal(c.in_cover[1], c.cut | (c.phase == 2))
    # cover union is everything, intersection is the cut set
    assert np.all(c.in_cover[0] | c.in_cover[1])
    assert np.array_equal(c.in_cover[0] & c.in_cover[1], c.cut)


def check_arcs_chain(c):
    arcs = sorted((a for lst in c.arcs.values() for a in lst), key=lambda a: a.l0)
    total = sum(a.l1 - a.l0 for a in arcs)
    assert total == pytest.approx(c.spline.period, rel=1e-13)
    for a, b in zip(arcs, arcs[1:]):
        assert a.l1 == pytest.approx(b.l0, abs=1e-15)
        assert np.allclose(a.p1, b.p0)


def test_arcs_chain_around_the_curve():
    check_arcs_chain(disk(16))


def test_ghost_edges():
    c = disk(16)
    for i in (1, 2):
        g = c.ghost_edges(i)
        cov = c.in_cover[i - 1]
        assert np.all(cov[g[:, 0]] & cov[g[:, 1]])
        assert np.all(c.cut[g[:, 0]] | c.cut[g[:, 1]])
        # every edge between two cut cells is a ghost edge of both phases
    both = {tuple(r) for r in c.ghost_edges(1).tolist()} & {tuple(r) for r in c.ghost_edges(2).tolist()}
    cc = {tuple(r) for r in c.mesh.interior_edges().tolist() if c.cut[r[0]] and c.cut[r[1]]}
    assert both == cc


@pytest.mark.parametrize("nc", [16, 32, 64])
def test_mesh_assumptions_for_disk(nc):
    rep = check_mesh_assumptions(disk(nc))
    assert rep.max_chain_len <= 3
    assert rep.boundary_edge_violations == 0


def test_no_interface_is_all_phase_two():
    c = classify(StructuredMesh(4), None)
    assert not c.cut.any() and np.all(c.phase == 2)
    assert len(c.ghost_edges(1)) == 0 and len(c.ghost_edges(2)) == 0


def test_curve_through_grid_nodes_and_lines():
    # a circle centred on a node and passing through grid nodes exactly
    c = disk(16, center=(0.5, 0.5), radius=0.25)
    assert_cut_set_consistent(c)
    check_arcs_chain(c)
    assert check_mesh_assumptions(c).max_chain_len <= 3


def test_boundary_touching_interface_rejected():
    with pytest.raises(MeshError):
        disk(16, center=(0.5, 0.5), radius=0.5)


def test_tiny_interface_rejected():
    with pytest.raises(MeshError):
        disk(4, center=(0.6, 0.6), radius=0.02)


def test_raster_and_exports(tmp_path):
    c = disk(16)
    img = c.raster()
    assert img.shape == (16, 16) and set(np.unique(img)) <= {0, 128, 255}
    c.write_pgm(tmp_path / "c.pgm")
    c.write_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.pgm").read_bytes().startswith(b"P5")
    data = np.loadtxt(tmp_path / "c.csv", delimiter=",", skiprows=1)
    assert data.shape == (256, 7)


def test_deformed_curve_classification():
    f = lambda l: np.stack([0.5 + 0.3 * np.cos(l) * (1 + 0.2 * np.cos(5 * l)),  # noqa: E731
                            0.5 + 0.3 * np.sin(l) * (1 + 0.2 * np.cos(5 * l))], axis=-1)
    c = classify(StructuredMesh(24), fit_periodic_spline(curve_markers(f, 2 * np.pi, 400)))
    assert_cut_set_consistent(c)
