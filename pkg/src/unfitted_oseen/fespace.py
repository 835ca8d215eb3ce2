"""Tensor-product Lagrange spaces on the phase covers.

Every field is stored as a full array over the global nodes of the
background grid, one array per phase.  Nodes outside the cover of a phase
hold zero, so evaluating a phase field anywhere in the domain gives its
extension by zero at the degrees of freedom.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from numpy.typing import NDArray

from .errors import MeshError
from .mesh import Classification, StructuredMesh


@lru_cache(maxsize=None)
def gll_nodes(k: int) -> NDArray[np.float64]:
    """Gauss-Lobatto-Legendre nodes of degree ``k`` on ``[0, 1]``."""
    if k < 1:
        raise ValueError("degree must be >= 1")
    if k == 1:
        x = np.array([-1.0, 1.0])
    else:
        inner = np.polynomial.legendre.Legendre.basis(k).deriv().roots()
        x = np.concatenate([[-1.0], np.sort(inner.real), [1.0]])
    out = 0.5 * (x + 1.0)
    out.flags.writeable = False
    return out


class TensorBasis:
    """Nodal 1D Lagrange basis of degree ``k`` on GLL nodes and its tensor products.

    Local 2D basis index ``a = iy * (k + 1) + ix``.
    """

    def __init__(self, k: int):
        self.k = k
        self.nodes = gll_nodes(k)
        n = k + 1
        V = np.vander(self.nodes, n, increasing=True)
        # coeffs[m, i]: coefficient of t**m in the i-th basis polynomial
        self.coeffs = np.linalg.solve(V, np.eye(n))
        self.n1 = n
        self.nb = n * n

    def eval1d(self, t, deriv: int = 0) -> NDArray[np.float64]:
        """Values (or ``deriv``-th derivatives) of all 1D basis functions at ``t``; shape ``(len(t), k+1)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        n = self.n1
        out = np.zeros((len(t), n))
        if deriv > self.k:
            return out
        for m in range(deriv, n):
            fac = factorial(m) / factorial(m - deriv)
            out += fac * (t ** (m - deriv))[:, None] * self.coeffs[m][None, :]
        return out

    def eval2d(self, xi, eta, dx: int = 0, dy: int = 0) -> NDArray[np.float64]:
        """Derivative ``d^dx/dxi^dx d^dy/deta^dy`` of all 2D basis functions; shape ``(npts, nb)``."""
        a = self.eval1d(xi, dx)
        b = self.eval1d(eta, dy)
        return (b[:, :, None] * a[:, None, :]).reshape(len(a), -1)


@lru_cache(maxsize=None)
def tensor_basis(k: int) -> TensorBasis:
    return TensorBasis(k)


@dataclass(frozen=True)
class NodeGrid:
    """Global nodes of the degree-``k`` space on a structured mesh."""

    mesh: StructuredMesh
    k: int

    @property
    def n1(self) -> int:
        return self.k * self.mesh.nc + 1

    @property
    def n_nodes(self) -> int:
        return self.n1 * self.n1

    def coords(self) -> NDArray[np.float64]:
        t = gll_nodes(self.k)
        h = self.mesh.h
        base = np.arange(self.mesh.nc)[:, None] * h + t[None, :-1] * h
        line = np.concatenate([base.ravel(), [self.mesh.nc * h]])
        X, Y = np.meshgrid(line + self.mesh.origin[0], line + self.mesh.origin[1], indexing="xy")
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    @property
    def connectivity(self) -> NDArray[np.intp]:
        """Global node of every (element, local node); shape ``(n_elements, (k+1)**2)``."""
        return _connectivity(self.mesh.nc, self.k)

    def boundary_nodes(self) -> NDArray[np.intp]:
        n1 = self.n1
        g = np.arange(self.n_nodes)
        gx, gy = g % n1, g // n1
        return g[(gx == 0) | (gx == n1 - 1) | (gy == 0) | (gy == n1 - 1)]


@lru_cache(maxsize=32)
def _connectivity(nc: int, k: int) -> NDArray[np.intp]:
    n1 = k * nc + 1
    e = np.arange(nc * nc)
    i, j = e % nc, e // nc
    lx = np.tile(np.arange(k + 1), k + 1)
    ly = np.repeat(np.arange(k + 1), k + 1)
    gx = k * i[:, None] + lx[None, :]
    gy = k * j[:, None] + ly[None, :]
    out = gy * n1 + gx
    out.flags.writeable = False
    return out


@dataclass
class DofMap:
    """Unknown numbering of one classification.

    Velocity unknowns are ordered ``[u1_x, u1_y, u2_x, u2_y]`` and pressure
    unknowns ``[p1, p2]`` after all velocity unknowns, followed by one
    Lagrange multiplier.  ``vel[i][g]`` (``pres[i][g]``) is the index of
    global node ``g`` within the phase-``i`` block, or ``-1``.
    """

    classification: Classification
    k: int
    vel: tuple[NDArray[np.intp], NDArray[np.intp]]
    pres: tuple[NDArray[np.intp], NDArray[np.intp]]
    n_u: tuple[int, int]
    n_p: tuple[int, int]

    @classmethod
    def build(cls, c: Classification, k: int) -> "DofMap":
        vg, pg = NodeGrid(c.mesh, k), NodeGrid(c.mesh, k - 1)
        vel, pres, n_u, n_p = [], [], [], []
        for i in (1, 2):
            cov = c.cover(i)
            for grid, store, count in ((vg, vel, n_u), (pg, pres, n_p)):
                active = np.zeros(grid.n_nodes, dtype=bool)
                active[grid.connectivity[cov].ravel()] = True
                idx = np.full(grid.n_nodes, -1, dtype=np.intp)
                idx[active] = np.arange(int(active.sum()))
                store.append(idx)
                count.append(int(active.sum()))
        return cls(c, k, (vel[0], vel[1]), (pres[0], pres[1]), (n_u[0], n_u[1]), (n_p[0], n_p[1]))

    @property
    def vel_offsets(self) -> tuple[int, int]:
        """Start of the x-component block of each phase (y follows after ``n_u[i]``)."""
        return 0, 2 * self.n_u[0]

    @property
    def pres_offsets(self) -> tuple[int, int]:
        nv = 2 * (self.n_u[0] + self.n_u[1])
        return nv, nv + self.n_p[0]

    @property
    def n_vel(self) -> int:
        return 2 * (self.n_u[0] + self.n_u[1])

    @property
    def size(self) -> int:
        return self.n_vel + self.n_p[0] + self.n_p[1] + 1

    @property
    def multiplier(self) -> int:
        return self.size - 1

    def velocity_dofs(self, phase: int, elements, comp: int) -> NDArray[np.intp]:
        """System indices of component ``comp`` for ``elements``; shape ``(len, (k+1)**2)``."""
        conn = NodeGrid(self.classification.mesh, self.k).connectivity[np.asarray(elements)]
        loc = self.vel[phase - 1][conn]
        if np.any(loc < 0):
            raise MeshError("element outside the velocity cover")
        return self.vel_offsets[phase - 1] + comp * self.n_u[phase - 1] + loc

    def pressure_dofs(self, phase: int, elements) -> NDArray[np.intp]:
        conn = NodeGrid(self.classification.mesh, self.k - 1).connectivity[np.asarray(elements)]
        loc = self.pres[phase - 1][conn]
        if np.any(loc < 0):
            raise MeshError("element outside the pressure cover")
        return self.pres_offsets[phase - 1] + loc

    def dirichlet_dofs(self) -> NDArray[np.intp]:
        """Phase-2 velocity unknowns on the outer boundary (both components)."""
        grid = NodeGrid(self.classification.mesh, self.k)
        b = grid.boundary_nodes()
        loc = self.vel[1][b]
        loc = loc[loc >= 0]
        off = self.vel_offsets[1]
        return np.concatenate([off + loc, off + self.n_u[1] + loc])

    def split(self, x: NDArray) -> tuple["FieldPair", "FieldPair"]:
        """Velocity and pressure pairs from a system vector."""
        mesh = self.classification.mesh
        vg, pg = NodeGrid(mesh, self.k), NodeGrid(mesh, self.k - 1)
        uv, pv = [], []
        for i in (1, 2):
            u = np.zeros((vg.n_nodes, 2))
            act = self.vel[i - 1] >= 0
            o = self.vel_offsets[i - 1]
            n = self.n_u[i - 1]
            u[act, 0] = x[o + self.vel[i - 1][act]]
            u[act, 1] = x[o + n + self.vel[i - 1][act]]
            uv.append(u)
            p = np.zeros((pg.n_nodes, 1))
            act = self.pres[i - 1] >= 0
            p[act, 0] = x[self.pres_offsets[i - 1] + self.pres[i - 1][act]]
            pv.append(p)
        return FieldPair(mesh, self.k, (uv[0], uv[1])), FieldPair(mesh, self.k - 1, (pv[0], pv[1]))

    def gather(self, u: "FieldPair", p: "FieldPair") -> NDArray:
        """System vector holding the active coefficients of ``u`` and ``p``."""
        x = np.zeros(self.size)
        for i in (1, 2):
            act = self.vel[i - 1] >= 0
            o = self.vel_offsets[i - 1]
            n = self.n_u[i - 1]
            x[o + self.vel[i - 1][act]] = u.values[i - 1][act, 0]
            x[o + n + self.vel[i - 1][act]] = u.values[i - 1][act, 1]
            act = self.pres[i - 1] >= 0
            x[self.pres_offsets[i - 1] + self.pres[i - 1][act]] = p.values[i - 1][act, 0]
        return x


@dataclass(frozen=True)
class FieldPair:
    """Nodal coefficients of a phase pair; ``values[i]`` has shape ``(n_nodes, ncomp)``."""

    mesh: StructuredMesh
    k: int
    values: tuple[NDArray[np.float64], NDArray[np.float64]]

    @property
    def ncomp(self) -> int:
        return self.values[0].shape[1]

    @classmethod
    def zeros(cls, mesh: StructuredMesh, k: int, ncomp: int) -> "FieldPair":
        n = NodeGrid(mesh, k).n_nodes
        return cls(mesh, k, (np.zeros((n, ncomp)), np.zeros((n, ncomp))))

    def scaled(self, s: float) -> "FieldPair":
        return FieldPair(self.mesh, self.k, (s * self.values[0], s * self.values[1]))

    def to_csv(self, path) -> None:
        xy = NodeGrid(self.mesh, self.k).coords()
        cols = [xy] + [self.values[0], self.values[1]]
        names = ["x", "y"] + [f"f1_{c}" for c in range(self.ncomp)] + [f"f2_{c}" for c in range(self.ncomp)]
        np.savetxt(path, np.hstack(cols), delimiter=",", header=",".join(names), comments="")


def locate_points(mesh: StructuredMesh, x: NDArray) -> tuple[NDArray[np.intp], NDArray, NDArray]:
    """Element (half-open lower-left ownership, last cell closed) and local coordinates."""
    x = np.asarray(x, dtype=float)
    h = mesh.h
    rx = (x[:, 0] - mesh.origin[0]) / h
    ry = (x[:, 1] - mesh.origin[1]) / h
    tol = 1e-10
    if np.any(rx < -tol) or np.any(rx > mesh.nc + tol) or np.any(ry < -tol) or np.any(ry > mesh.nc + tol):
        raise MeshError("evaluation point outside the domain")
    i = np.clip(np.floor(rx).astype(np.intp), 0, mesh.nc - 1)
    j = np.clip(np.floor(ry).astype(np.intp), 0, mesh.nc - 1)
    return j * mesh.nc + i, rx - i, ry - j


def eval_local(f: FieldPair, phase: int, elements, xi, eta, dx: int = 0, dy: int = 0) -> NDArray:
    """Evaluate a derivative of the phase field at local coordinates in given elements.

    Returns shape ``(npts, ncomp)``.
    """
    basis = tensor_basis(f.k)
    B = basis.eval2d(xi, eta, dx, dy) / f.mesh.h ** (dx + dy)
    conn = NodeGrid(f.mesh, f.k).connectivity[np.asarray(elements)]
    coef = f.values[phase - 1][conn]  # (npts, nb, ncomp)
    return np.einsum("pa,pac->pc", B, coef)


def eval_field(f: FieldPair, phase: int, x, deriv: tuple[int, int] = (0, 0)) -> NDArray:
    """Value or partial derivative of a phase field at physical points ``x`` (shape ``(..., 2)``)."""
    x = np.asarray(x, dtype=float)
    shape = x.shape[:-1]
    pts = x.reshape(-1, 2)
    if deriv[0] + deriv[1] > f.k:
        return np.zeros(shape + (f.ncomp,))
    e, xi, eta = locate_points(f.mesh, pts)
    out = eval_local(f, phase, e, xi, eta, deriv[0], deriv[1])
    return out.reshape(shape + (f.ncomp,))


def interpolate(funcs, c: Classification | None, k: int, mesh: StructuredMesh | None = None) -> FieldPair:
    """Nodal interpolation of ``(f1, f2)`` on the phase covers (all nodes if ``c`` is None).

    Each ``f_i`` maps points ``(n, 2)`` to ``(n,)`` or ``(n, ncomp)``.
    """
    mesh = c.mesh if c is not None else mesh
    grid = NodeGrid(mesh, k)
    xy = grid.coords()
    vals = []
    for i, fun in enumerate(funcs, start=1):
        v = np.asarray(fun(xy), dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if c is not None:
            active = np.zeros(grid.n_nodes, dtype=bool)
            active[grid.connectivity[c.cover(i)].ravel()] = True
            v = np.where(active[:, None], v, 0.0)
        vals.append(v)
    return FieldPair(mesh, k, (vals[0], vals[1]))


def pullback_eval(f: FieldPair, phase: int, x, m: int, n: int, stack, deriv: int = 0, preimage=None):
    """Evaluate ``f`` (a field of step ``m``) at ``X^{n,m}(x)``.

    With ``deriv=1`` the gradient with respect to ``x`` is returned, shape
    ``(..., ncomp, 2)``, using the chain rule with the inverse of the forward
    Jacobian at the preimage.
    """
    x = np.asarray(x, dtype=float)
    y = x if m == n else (stack.inverse_map(x, m, n) if preimage is None else preimage)
    if deriv == 0:
        return eval_field(f, phase, y)
    g = np.stack([eval_field(f, phase, y, (1, 0)), eval_field(f, phase, y, (0, 1))], axis=-1)
    if m == n:
        return g
    _, jac = stack.forward_jacobian(y, m, n)
    return g @ np.linalg.inv(jac)


def weighted_norms(rules_by_phase, values_fn, weights=(1.0, 1.0)) -> float:
    """``sqrt(sum_i weight_i * integral |values_fn(i, points)|^2)`` over phase rules.

    ``rules_by_phase[i-1]`` is an iterable of ``(points, weights)``; ``values_fn``
    returns arrays whose trailing axes are summed.
    """
    total = 0.0
    for i in (1, 2):
        for pts, wts in rules_by_phase[i - 1]:
            if len(wts) == 0:
                continue
            v = np.asarray(values_fn(i, pts), dtype=float).reshape(len(wts), -1)
            total += weights[i - 1] * float(np.sum(wts * np.sum(v * v, axis=1)))
    return float(np.sqrt(total))
