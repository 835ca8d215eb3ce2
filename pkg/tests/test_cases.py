from __future__ import annotations

import numpy as np
import pytest

from unfitted_oseen.cases import ManufacturedOseenCase, SteadyPolyCase, make_case, vortex_field

rng = np.random.default_rng(42)


def fd_grad(f, x, d=1e-6):
    out = []
    for ax in (0, 1):
        e = np.zeros(2)
        e[ax] = d
        out.append((f(x + e) - f(x - e)) / (2 * d))
    return np.stack(out, axis=-1)


@pytest.mark.parametrize("case", [ManufacturedOseenCase(), SteadyPolyCase()])
@pytest.mark.parametrize("i", [1, 2])
def test_derivatives_against_finite_differences(case, i):
    x = rng.random((50, 2)) * 0.8 + 0.1
    t = 0.7
    g = case.velocity_grad(i, x, t)
    assert np.allclose(g, fd_grad(lambda y: case.velocity(i, y, t), x), atol=1e-7)
    lap = sum(fd_grad(lambda y, a=a: case.velocity_grad(i, y, t)[..., a], x)[..., a] for a in (0, 1))
    assert np.allclose(case.velocity_lap(i, x, t), lap, atol=1e-6)
    dt = (case.velocity(i, x, t + 1e-6) - case.velocity(i, x, t - 1e-6)) / 2e-6
    assert np.allclose(case.velocity_dt(i, x, t), dt, atol=1e-7)
    assert np.allclose(case.pressure_grad(i, x, t), fd_grad(lambda y: case.pressure(i, y, t), x), atol=1e-7)


@pytest.mark.parametrize("i", [1, 2])
def test_divergence_free(i):
    case = ManufacturedOseenCase()
    x = rng.random((1000, 2))
    g = case.velocity_grad(i, x, 0.3)
    assert np.abs(g[:, 0, 0] + g[:, 1, 1]).max() < 1e-12


@pytest.mark.parametrize("i", [1, 2])
def test_forcing_matches_finite_difference_material_derivative(i):
    """``f - (-nu lap u + grad p)`` equals the material derivative of ``u`` by central differences."""
    case = ManufacturedOseenCase()
    d = 1e-5
    x = rng.random((100, 2)) * 0.8 + 0.1
    t = rng.random(100) * 1.5
    rel = []
    for j in range(100):
        X = x[j:j + 1]
        mat = case.forcing(i, X, t[j])[0] + case.nu[i - 1] * case.velocity_lap(i, X, t[j])[0] \
            - case.pressure_grad(i, X, t[j])[0]
        w = case.field.w(X, t[j])[0]
        fd = (case.velocity(i, X + d * w, t[j] + d)[0] - case.velocity(i, X - d * w, t[j] - d)[0]) / (2 * d)
        rel.append(np.linalg.norm(mat - fd) / max(np.linalg.norm(mat), 1e-3))
    assert max(rel) < 1e-6


def test_vortex_field_properties():
    w = vortex_field()
    x = rng.random((500, 2))
    g = w.grad(x, 0.4)
    assert np.abs(g[:, 0, 0] + g[:, 1, 1]).max() < 1e-12
    assert np.allclose(g, fd_grad(lambda y: w.w(y, 0.4), x), atol=1e-7)
    s = np.linspace(0, 1, 50)
    for b in (np.column_stack([s, 0 * s]), np.column_stack([s, 1 + 0 * s]), np.column_stack([0 * s, s]),
              np.column_stack([1 + 0 * s, s])):
        assert np.abs(w.w(b, 0.2)).max() < 1e-12
    # the swirl stops at t = 1.5
    assert np.abs(w.w(x, 1.5)).max() < 1e-12


def test_jump_data_definitions():
    case = ManufacturedOseenCase()
    l = np.linspace(0, case.perimeter, 7, endpoint=False)
    x = case.curve(l)
    assert np.allclose(np.linalg.norm(x - case.center, axis=1), case.radius)
    n = (x - case.center) / case.radius
    assert np.allclose(case.g0(x, n, 0.2), case.velocity(1, x, 0.2) - case.velocity(2, x, 0.2))
    g1 = case.g1(x, n, 0.2)
    d1 = np.einsum("qcd,qd->qc", case.velocity_grad(1, x, 0.2), n)
    d2 = np.einsum("qcd,qd->qc", case.velocity_grad(2, x, 0.2), n)
    dp = case.pressure(1, x, 0.2) - case.pressure(2, x, 0.2)
    assert np.allclose(g1, case.nu[0] * d1 - case.nu[1] * d2 - dp[:, None] * n)


def test_make_case():
    assert make_case("steady-poly").name == "steady-poly"
    assert make_case("manufactured", nu=(2.0, 1.0)).nu == (2.0, 1.0)
    with pytest.raises(ValueError):
        make_case("nope")
