from __future__ import annotations

import numpy as np
import pytest

from unfitted_oseen.geometry import circle_markers, curve_markers, fit_periodic_spline
from unfitted_oseen.mesh import StructuredMesh, classify
from unfitted_oseen.quadrature import CutQuadrature, check_sides, edge_rule, gauss01, integrate, tensor_rule

C = np.array([0.5, 0.75])
R = 0.15


def setup(nc, eta=None, curve=None, n_vol=6, n_if=6):
    if curve is None:
        m = circle_markers(C, R, eta or 0.25 / nc)
    else:
        m = curve
    s = fit_periodic_spline(m)
    c = classify(StructuredMesh(nc), s)
    return s, c, CutQuadrature(c, n_vol, n_if)


def spline_gauss(s, n=12):
    """Dense Gauss sampling of the spline, independent of the cut machinery."""
    x, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (x + 1.0)
    l = s.knots[:-1, None] + s.seg_len[:, None] * t[None, :]
    wt = s.seg_len[:, None] * 0.5 * w[None, :]
    return s.eval(l).reshape(-1, 2), s.eval(l, 1).reshape(-1, 2), wt.ravel()


def green_moment(s, a, b):
    """Integral of ``x^a y^b`` over the enclosed region via ``oint x^(a+1) y^b / (a+1) dy``."""
    p, d, w = spline_gauss(s)
    val = np.sum(w * p[:, 0] ** (a + 1) * p[:, 1] ** b / (a + 1) * d[:, 1])
    return val if s.ccw else -val


def cell_moment(o, h, a, b):
    return ((o[0] + h) ** (a + 1) - o[0] ** (a + 1)) / (a + 1) * ((o[1] + h) ** (b + 1) - o[1] ** (b + 1)) / (b + 1)


def phase1_moment(c, q, a, b, n=6):
    total = 0.0
    for e in c.interior(1):
        pts, w = tensor_rule(c.mesh.element_origin(e), c.mesh.h, n)
        total += np.sum(w * pts[:, 0] ** a * pts[:, 1] ** b)
    for r1, _ in q.volume.values():
        total += integrate(r1, lambda P: P[:, 0] ** a * P[:, 1] ** b)
    return total


def test_gauss_and_tensor_rules():
    t, w = gauss01(4)
    assert np.sum(w) == pytest.approx(1.0)
    assert np.sum(w * t**7) == pytest.approx(1 / 8)
    pts, w = tensor_rule((0.25, 0.5), 0.5, 3)
    assert np.sum(w) == pytest.approx(0.25)
    assert np.sum(w * pts[:, 0] ** 2 * pts[:, 1] ** 3) == pytest.approx(cell_moment((0.25, 0.5), 0.5, 2, 3))
    er = edge_rule([0, 0], [0.3, 0.4], 3)
    assert np.sum(er.weights) == pytest.approx(0.5)


@pytest.mark.parametrize("nc", [16, 32])
def test_disk_area_green_and_length(nc):
    s, c, q = setup(nc, eta=1 / 256 / 4)
    assert abs(q.area(1) - s.area()) < 1e-10
    assert abs(q.area(1) + q.area(2) - 1.0) < 1e-12
    assert abs(q.green_area() - s.area()) < 1e-10
    assert abs(q.interface_length() - s.length()) < 1e-10
    # the spline itself is close to the disk
    assert abs(s.area() - np.pi * R**2) < 1e-9


@pytest.mark.parametrize("ab", [(0, 0), (1, 0), (0, 1), (2, 1), (3, 1), (2, 2), (4, 0)])
def test_phase_moments_match_green_oracle(ab):
    s, c, q = setup(16)
    a, b = ab
    assert phase1_moment(c, q, a, b) == pytest.approx(green_moment(s, a, b), abs=1e-12)


def test_cut_cell_pieces_partition_the_cell():
    _, c, q = setup(16)
    h = c.mesh.h
    for e, (r1, r2) in q.volume.items():
        o = c.mesh.element_origin(e)
        for a, b in [(0, 0), (2, 1), (3, 3)]:
            f = lambda P: P[:, 0] ** a * P[:, 1] ** b  # noqa: E731
            assert integrate(r1, f) + integrate(r2, f) == pytest.approx(cell_moment(o, h, a, b), rel=1e-12, abs=1e-18)


def test_points_on_correct_side_and_positive_weights():
    s, c, q = setup(16)
    for r1, r2 in q.volume.values():
        assert check_sides(s, r1) and check_sides(s, r2)
        assert np.all(r1.weights > 0) and np.all(r2.weights > 0)
        o = c.mesh.element_origin(r1.element)
        for r in (r1, r2):
            assert np.all(r.points >= o - 1e-14) and np.all(r.points <= o + c.mesh.h + 1e-14)


def test_interface_rule_integrates_against_oracle():
    s, c, q = setup(16)
    p, d, w = spline_gauss(s)
    speed = np.linalg.norm(d, axis=1)
    exact = np.sum(w * speed * p[:, 0] ** 2 * p[:, 1])
    approx = sum(np.sum(r.weights * r.points[:, 0] ** 2 * r.points[:, 1]) for r in q.interface.values())
    assert approx == pytest.approx(exact, rel=1e-12)
    for r in q.interface.values():
        assert np.allclose(np.linalg.norm(r.normals, axis=1), 1.0)
        # normals point out of the disk
        assert np.all(np.sum(r.normals * (r.points - C), axis=1) > 0)


def test_deformed_interface_needs_subdivision_and_stays_accurate():
    f = lambda l: np.stack([0.5 + 0.3 * np.cos(l) * (1 + 0.25 * np.cos(7 * l)),  # noqa: E731
                            0.5 + 0.3 * np.sin(l) * (1 + 0.25 * np.cos(7 * l))], axis=-1)
    s, c, q = setup(12, curve=curve_markers(f, 2 * np.pi, 600))
    assert abs(q.area(1) - s.area()) < 1e-11
    assert phase1_moment(c, q, 2, 1) == pytest.approx(green_moment(s, 2, 1), abs=1e-12)
    for r1, r2 in q.volume.values():
        assert check_sides(s, r1) and check_sides(s, r2)


def test_csv_export(tmp_path):
    _, _, q = setup(16)
    q.write_csv(tmp_path / "q.csv")
    data = np.loadtxt(tmp_path / "q.csv", delimiter=",", skiprows=1)
    assert data.shape[1] == 5 and len(data) > 0
