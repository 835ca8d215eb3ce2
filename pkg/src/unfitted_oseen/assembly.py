"""Bilinear forms, load vectors and the one-step saddle-point system.

Unknowns are ordered ``[u1_x, u1_y, u2_x, u2_y, p1, p2, mu]`` (see
:class:`~unfitted_oseen.fespace.DofMap`).  Every form is assembled into its
own sparse matrix of full system size so the time-step matrix and the Stokes
projection matrix can be combined from the same pieces.

Notation for an interface quantity ``a = (a1, a2)``:

* jump ``[a] = a1 - a2``, with ``n`` the unit normal pointing out of phase 1;
* average ``<a> = k1 a1 + k2 a2`` with ``k1 = nu2 / (nu1 + nu2)``,
  ``k2 = nu1 / (nu1 + nu2)``;
* flipped average ``<<a>> = k2 a1 + k1 a2``.

Ghost-penalty jumps use a fixed edge orientation: ``+x`` on vertical edges
and ``+y`` on horizontal ones, the jump being (left or lower) minus (right or
upper).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray

from .errors import SolverError
from .fespace import DofMap, tensor_basis
from .mesh import HORIZONTAL, Classification
from .quadrature import CutQuadrature, gauss01, tensor_rule


@dataclass(frozen=True)
class PenaltyParams:
    """Penalty parameters and the two viscosities (``nu1 >= nu2 > 0``)."""

    gamma0: float = 1.0e3
    gamma1: float = 1.0
    nu: tuple[float, float] = (1.0, 1.0e-3)

    def __post_init__(self) -> None:
        n1, n2 = self.nu
        if not (n1 > 0 and n2 > 0):
            raise ValueError("viscosities must be positive")
        if n2 > n1:
            raise ValueError("expected nu1 >= nu2")
        if self.gamma0 <= 0 or self.gamma1 < 0:
            raise ValueError("penalty parameters must be positive")

    @property
    def kappa(self) -> tuple[float, float]:
        n1, n2 = self.nu
        return n2 / (n1 + n2), n1 / (n1 + n2)

    @property
    def nu_h(self) -> float:
        """``k1 nu1 = k2 nu2 = nu1 nu2 / (nu1 + nu2)``."""
        n1, n2 = self.nu
        return n1 * n2 / (n1 + n2)

    @property
    def nu_avg(self) -> float:
        """``<nu> = k1 nu1 + k2 nu2``."""
        return 2.0 * self.nu_h


def bdf_coefficients(k: int) -> tuple[Fraction, ...]:
    """BDF-``k`` weights ``lambda_0..lambda_k`` with ``u'(t_n) ~ tau^-1 sum lambda_j u(t_{n-j})``.

    Obtained by solving the Taylor conditions ``sum_j lambda_j (-j)^m = [m == 1]``
    for ``m = 0..k`` in exact rational arithmetic.
    """
    n = k + 1
    A = [[Fraction((-j) ** m) for j in range(n)] for m in range(n)]
    b = [Fraction(1 if m == 1 else 0) for m in range(n)]
    # Gauss-Jordan elimination over the rationals
    for col in range(n):
        piv = next(r for r in range(col, n) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        b[col], b[piv] = b[piv], b[col]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col] / A[col][col]
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
                b[r] -= f * b[col]
    return tuple(b[i] / A[i][i] for i in range(n))


@dataclass(frozen=True)
class BDFScheme:
    k: int
    lam: tuple[Fraction, ...] = field(init=False)

    def __post_init__(self) -> None:
        if self.k < 1 or self.k > 6:
            raise ValueError("BDF order must be in 1..6")
        object.__setattr__(self, "lam", bdf_coefficients(self.k))

    @property
    def lam_float(self) -> NDArray[np.float64]:
        return np.array([float(v) for v in self.lam])


# ---------------------------------------------------------------------------


@dataclass
class Batch:
    """Quadrature data of a group of elements sharing one phase.

    Basis arrays have a leading axis of length ``len(elements)`` or 1 (shared).
    """

    phase: int
    elements: NDArray[np.intp]
    points: NDArray[np.float64]  # (E, nq, 2)
    weights: NDArray[np.float64]  # (E or 1, nq)
    phi: NDArray[np.float64]  # (E or 1, nq, nb)
    phi_x: NDArray[np.float64]
    phi_y: NDArray[np.float64]
    phi_lap: NDArray[np.float64]
    psi: NDArray[np.float64]  # (E or 1, nq, nbp)
    psi_x: NDArray[np.float64]
    psi_y: NDArray[np.float64]


def _basis_data(k: int, h: float, xi, eta):
    bv = tensor_basis(k)
    bp = tensor_basis(k - 1)
    phi = bv.eval2d(xi, eta)
    phi_x = bv.eval2d(xi, eta, 1, 0) / h
    phi_y = bv.eval2d(xi, eta, 0, 1) / h
    lap = (bv.eval2d(xi, eta, 2, 0) + bv.eval2d(xi, eta, 0, 2)) / h**2
    psi = bp.eval2d(xi, eta)
    psi_x = bp.eval2d(xi, eta, 1, 0) / h
    psi_y = bp.eval2d(xi, eta, 0, 1) / h
    return phi, phi_x, phi_y, lap, psi, psi_x, psi_y


class _Coo:
    def __init__(self, n: int):
        self.n = n
        self.rows: list[NDArray] = []
        self.cols: list[NDArray] = []
        self.vals: list[NDArray] = []

    def add(self, rows, cols, mats) -> None:
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        E = max(rows.shape[0], cols.shape[0], mats.shape[0])
        m, n = rows.shape[1], cols.shape[1]
        R = np.broadcast_to(rows[:, :, None], (E, m, n))
        C = np.broadcast_to(cols[:, None, :], (E, m, n))
        V = np.broadcast_to(mats, (E, m, n))
        self.rows.append(R.ravel())
        self.cols.append(C.ravel())
        self.vals.append(V.ravel())

    def tocsr(self) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix((self.n, self.n))
        r = np.concatenate(self.rows)
        c = np.concatenate(self.cols)
        v = np.concatenate(self.vals)
        return sp.coo_matrix((v, (r, c)), shape=(self.n, self.n)).tocsr()


def _t(a):
    return np.swapaxes(a, -1, -2)


class Assembler:
    """All forms on one geometry (classification + quadrature).

    Args:
        c: classification of the current interface position.
        k: velocity degree.
        params: penalties and viscosities.
        n_cut: Gauss points per direction on cut-cell fan pieces.
        n_if: Gauss points per cubic piece of the interface.
    """

    def __init__(self, c: Classification, k: int, params: PenaltyParams, n_cut: int | None = None,
                 n_if: int | None = None, quad: CutQuadrature | None = None):
        self.c = c
        self.k = k
        self.params = params
        self.mesh = c.mesh
        self.h = c.mesh.h
        self.dofs = DofMap.build(c, k)
        self.n_ref = k + 2
        self.n_cut = n_cut or (k + 3)
        self.n_if = n_if or (k + 3)
        self.quad = quad if quad is not None else CutQuadrature(c, self.n_cut, self.n_if)
        self.N = self.dofs.size
        self.batches = {1: self._batches(1), 2: self._batches(2)}
        self._vdofs = {}
        self._pdofs = {}
        for i in (1, 2):
            cov = c.cover(i)
            self._vdofs[i] = np.full((c.mesh.n_elements, 2, (k + 1) ** 2), -1, dtype=np.intp)
            self._pdofs[i] = np.full((c.mesh.n_elements, k * k), -1, dtype=np.intp)
            for comp in (0, 1):
                self._vdofs[i][cov, comp] = self.dofs.velocity_dofs(i, cov, comp)
            self._pdofs[i][cov] = self.dofs.pressure_dofs(i, cov)
        self._forms: dict[str, sp.csr_matrix] | None = None
        self._constraint: NDArray | None = None

    # ---- quadrature batches ---------------------------------------------

    def _batches(self, i: int) -> list[Batch]:
        h = self.h
        out = []
        unc = self.c.interior(i)
        if len(unc):
            pts, w = tensor_rule((0.0, 0.0), h, self.n_ref)
            data = _basis_data(self.k, h, pts[:, 0] / h, pts[:, 1] / h)
            org = self.mesh.element_origin(unc)
            out.append(Batch(i, unc, org[:, None, :] + pts[None], w[None], *(d[None] for d in data)))
        for e in self.c.cut_elements():
            rule = self.quad.volume[int(e)][i - 1]
            if len(rule.weights) == 0:
                continue
            o = self.mesh.element_origin(e)
            loc = (rule.points - o) / h
            data = _basis_data(self.k, h, loc[:, 0], loc[:, 1])
            out.append(Batch(i, np.array([e]), rule.points[None], rule.weights[None], *(d[None] for d in data)))
        return out

    def vdofs(self, i: int, elements, comp: int) -> NDArray[np.intp]:
        return self._vdofs[i][elements, comp]

    def pdofs(self, i: int, elements) -> NDArray[np.intp]:
        return self._pdofs[i][elements]

    # ---- matrices ---------------------------------------------------------

    @property
    def forms(self) -> dict[str, sp.csr_matrix]:
        if self._forms is None:
            self._forms = self._assemble_forms()
        return self._forms

    @property
    def constraint(self) -> NDArray[np.float64]:
        """Row ``sum_i nu_i^-1 (q_i, 1)`` over pressure unknowns."""
        if self._constraint is None:
            c = np.zeros(self.N)
            for i in (1, 2):
                nui = self.params.nu[i - 1]
                for b in self.batches[i]:
                    loc = np.einsum("eq,eqa->ea", np.broadcast_to(b.weights, b.points.shape[:2]),
                                    np.broadcast_to(b.psi, b.points.shape[:2] + b.psi.shape[2:]))
                    np.add.at(c, self.pdofs(i, b.elements), loc / nui)
            self._constraint = c
        return self._constraint

    def _assemble_forms(self) -> dict[str, sp.csr_matrix]:
        N = self.N
        names = ["stiff", "mass", "B", "B1m", "B1l", "Gp", "nitsche", "J0", "Ju", "Jp"]
        coo = {n: _Coo(N) for n in names}
        for i in (1, 2):
            nui = self.params.nu[i - 1]
            for b in self.batches[i]:
                w = b.weights[:, :, None]
                el = b.elements
                K = nui * (_t(b.phi_x) @ (w * b.phi_x) + _t(b.phi_y) @ (w * b.phi_y))
                M = _t(b.phi) @ (w * b.phi)
                pd = self.pdofs(i, el)
                for comp, (d, dpsi) in enumerate(((b.phi_x, b.psi_x), (b.phi_y, b.psi_y))):
                    vd = self.vdofs(i, el, comp)
                    coo["stiff"].add(vd, vd, K)
                    coo["mass"].add(vd, vd, M)
                    coo["B"].add(vd, pd, -(_t(d) @ (w * b.psi)))
                    coo["B1m"].add(pd, vd, (_t(dpsi) @ (w * b.phi)) / nui)
                    coo["B1l"].add(pd, vd, -(_t(dpsi) @ (w * b.phi_lap)))
                coo["Gp"].add(pd, pd, (_t(b.psi_x) @ (w * b.psi_x) + _t(b.psi_y) @ (w * b.psi_y)) / nui)
        self._interface_forms(coo)
        self._ghost_forms(coo)
        return {n: coo[n].tocsr() for n in names}

    def _interface_data(self, e: int):
        rule = self.quad.interface[e]
        o = self.mesh.element_origin(e)
        loc = (rule.points - o) / self.h
        bv = tensor_basis(self.k)
        bp = tensor_basis(self.k - 1)
        phi = bv.eval2d(loc[:, 0], loc[:, 1])
        dn = (bv.eval2d(loc[:, 0], loc[:, 1], 1, 0) * rule.normals[:, :1]
              + bv.eval2d(loc[:, 0], loc[:, 1], 0, 1) * rule.normals[:, 1:]) / self.h
        psi = bp.eval2d(loc[:, 0], loc[:, 1])
        return rule, phi, dn, psi

    def _interface_forms(self, coo) -> None:
        p = self.params
        k1, k2 = p.kappa
        nh = p.nu_h
        pen = p.gamma0 * p.nu_avg / self.h
        for e in self.c.cut_elements():
            e = int(e)
            rule, phi, dn, psi = self._interface_data(e)
            w = rule.weights[:, None]
            jump = np.hstack([phi, -phi])
            flux = nh * np.hstack([dn, dn])
            qavg = np.hstack([k1 * psi, k2 * psi])
            nit = -(jump.T @ (w * flux) + flux.T @ (w * jump))
            j0 = pen * (jump.T @ (w * jump))
            pd = np.concatenate([self.pdofs(1, [e])[0], self.pdofs(2, [e])[0]])[None]
            for comp in (0, 1):
                vd = np.concatenate([self.vdofs(1, [e], comp)[0], self.vdofs(2, [e], comp)[0]])[None]
                coo["nitsche"].add(vd, vd, nit[None])
                coo["J0"].add(vd, vd, j0[None])
                coo["B"].add(vd, pd, ((jump * rule.normals[:, comp:comp + 1]).T @ (w * qavg))[None])

    def _edge_jump_ops(self, deg: int, orient: int, lmax: int):
        """Reference jump operators ``[d_n^l phi]`` on an edge, l = 1..lmax.

        Returns edge weights (length ``h``) and a list of arrays
        ``(nq, 2 * nb)`` for the first and second element.
        """
        h = self.h
        b = tensor_basis(deg)
        t, w = gauss01(deg + 2)
        ops = []
        one = np.ones_like(t)
        zero = np.zeros_like(t)
        for l in range(1, lmax + 1):
            if orient == HORIZONTAL:
                first = b.eval2d(t, one, 0, l)
                second = b.eval2d(t, zero, 0, l)
            else:
                first = b.eval2d(one, t, l, 0)
                second = b.eval2d(zero, t, l, 0)
            ops.append(np.hstack([first, -second]) / h**l)
        return w * h, ops

    def _ghost_matrix(self, deg: int, orient: int, lmax: int, coef) -> NDArray:
        w, ops = self._edge_jump_ops(deg, orient, lmax)
        out = np.zeros((ops[0].shape[1],) * 2) if ops else None
        for l, op in enumerate(ops, start=1):
            out += coef(l) * (op.T @ (w[:, None] * op))
        return out

    def _ghost_forms(self, coo) -> None:
        h, k = self.h, self.k
        cu = lambda l: h ** (2 * l - 1) / factorial(l - 1) ** 2  # noqa: E731
        cp = lambda l: h ** (2 * l + 1) / factorial(l) ** 2  # noqa: E731
        gu = [self._ghost_matrix(k, o, k, cu) for o in (0, 1)]
        gp = [self._ghost_matrix(k - 1, o, k - 1, cp) if k > 1 else None for o in (0, 1)]
        for i in (1, 2):
            nui = self.params.nu[i - 1]
            edges = self.c.ghost_edges(i)
            for o in (0, 1):
                sel = edges[edges[:, 2] == o]
                if len(sel) == 0:
                    continue
                a, b = sel[:, 0], sel[:, 1]
                for comp in (0, 1):
                    vd = np.hstack([self.vdofs(i, a, comp), self.vdofs(i, b, comp)])
                    coo["Ju"].add(vd, vd, nui * gu[o][None])
                if gp[o] is not None and k > 1:
                    pd = np.hstack([self.pdofs(i, a), self.pdofs(i, b)])
                    coo["Jp"].add(pd, pd, gp[o][None] / nui)

    # ---- combined matrices --------------------------------------------------

    def _with_constraint(self, K: sp.spmatrix) -> sp.csr_matrix:
        c = self.constraint
        idx = np.nonzero(c)[0]
        m = self.dofs.multiplier
        extra = sp.coo_matrix(
            (np.concatenate([c[idx], c[idx]]), (np.concatenate([idx, np.full(len(idx), m)]), np.concatenate([np.full(len(idx), m), idx]))),
            shape=(self.N, self.N),
        )
        return (K + extra).tocsr()

    def A_h(self, ghost: bool = True) -> sp.csr_matrix:
        f = self.forms
        A = f["stiff"] + f["nitsche"] + f["J0"]
        return A + f["Ju"] if ghost else A

    def stab_scale(self) -> float:
        return self.params.gamma1 * self.params.nu[1] * self.h**2

    def K1(self, lam0: float, tau: float) -> sp.csr_matrix:
        """Time-step matrix with the mean constraint."""
        f = self.forms
        s = self.stab_scale()
        K = (self.A_h() + (lam0 / tau) * f["mass"] + f["B"] - f["B"].T
             + s * ((lam0 / tau) * f["B1m"] + f["B1l"]) + f["Jp"] + s * f["Gp"])
        return self._with_constraint(K)

    def K0(self) -> sp.csr_matrix:
        """Stokes-projection matrix with the mean constraint."""
        f = self.forms
        return self._with_constraint(self.A_h() + f["B"] - f["B"].T + f["Jp"])

    # ---- load vectors ---------------------------------------------------------

    def _points(self, b: Batch) -> NDArray:
        return b.points.reshape(-1, 2)

    def velocity_load(self, i: int, fn, op: str = "phi", values=None) -> NDArray:
        """``(F, op(v))`` over phase ``i`` where ``op`` is ``phi``, ``dx`` or ``dy``.

        ``fn(points)`` returns ``(n, 2)``; alternatively pass a list of
        precomputed ``values`` aligned with ``self.batches[i]``.
        """
        out = np.zeros(self.N)
        for bi, b in enumerate(self.batches[i]):
            E, nq = b.points.shape[:2]
            F = values[bi] if values is not None else np.asarray(fn(self._points(b)), dtype=float)
            F = F.reshape(E, nq, 2)
            B = {"phi": b.phi, "dx": b.phi_x, "dy": b.phi_y}[op]
            wF = b.weights[:, :, None] * F
            loc = _t(B) @ wF  # (E, nb, 2)
            for comp in (0, 1):
                np.add.at(out, self.vdofs(i, b.elements, comp), np.broadcast_to(loc[:, :, comp], self.vdofs(i, b.elements, comp).shape))
        return out

    def pressure_load(self, i: int, fn, op: str = "psi", values=None) -> NDArray:
        """``(F, q)`` for ``op='psi'`` (``F`` scalar) or ``(F, grad q)`` for ``op='grad'`` (``F`` vector)."""
        out = np.zeros(self.N)
        for bi, b in enumerate(self.batches[i]):
            E, nq = b.points.shape[:2]
            F = values[bi] if values is not None else np.asarray(fn(self._points(b)), dtype=float)
            if op == "psi":
                F = F.reshape(E, nq)
                loc = np.einsum("eqa,eq->ea", np.broadcast_to(b.psi, (E, nq, b.psi.shape[2])), b.weights * F)
            else:
                F = F.reshape(E, nq, 2)
                wF = b.weights[:, :, None] * F
                loc = np.einsum("eqa,eq->ea", np.broadcast_to(b.psi_x, (E, nq, b.psi.shape[2])), wF[..., 0])
                loc = loc + np.einsum("eqa,eq->ea", np.broadcast_to(b.psi_y, (E, nq, b.psi.shape[2])), wF[..., 1])
            pd = self.pdofs(i, b.elements)
            np.add.at(out, pd, loc)
        return out

    def interface_points(self) -> list[tuple[int, NDArray, NDArray]]:
        return [(e, r.points, r.normals) for e, r in sorted(self.quad.interface.items())]

    def interface_velocity_load(self, jump=None, avg2=None, flux=None) -> NDArray:
        """``(J, [v]) + (A, <<v>>) + (D, <nu d_n v>)`` on the interface.

        Each argument maps ``(points, normals) -> (n, 2)``.
        """
        k1, k2 = self.params.kappa
        nh = self.params.nu_h
        out = np.zeros(self.N)
        for e in self.c.cut_elements():
            e = int(e)
            rule, phi, dn, _ = self._interface_data(e)
            w = rule.weights
            terms = [np.asarray(f(rule.points, rule.normals)) if f is not None else None for f in (jump, avg2, flux)]
            for comp in (0, 1):
                v1 = np.zeros(phi.shape[1])
                v2 = np.zeros(phi.shape[1])
                if terms[0] is not None:
                    t = phi.T @ (w * terms[0][:, comp])
                    v1 += t
                    v2 -= t
                if terms[1] is not None:
                    t = phi.T @ (w * terms[1][:, comp])
                    v1 += k2 * t
                    v2 += k1 * t
                if terms[2] is not None:
                    t = nh * dn.T @ (w * terms[2][:, comp])
                    v1 += t
                    v2 += t
                np.add.at(out, self.vdofs(1, [e], comp)[0], v1)
                np.add.at(out, self.vdofs(2, [e], comp)[0], v2)
        return out

    def jump_data_load(self, g0=None, g1=None, g0_penalty: bool = True) -> NDArray:
        """Right-hand side terms of prescribed interface jumps.

        ``g0`` is the velocity jump ``[u]`` and ``g1`` the traction jump
        ``[nu d_n u - p n]``.  Momentum rows get
        ``(g1, <<v>>) - (g0, <nu d_n v>) + gamma0 <nu> / h (g0, [v])`` (the
        penalty part only with ``g0_penalty``); pressure rows get
        ``-(g0 . n, <q>)``.
        """
        pen = self.params.gamma0 * self.params.nu_avg / self.h
        jump = (lambda x, n: pen * g0(x, n)) if (g0 is not None and g0_penalty) else None
        flux = (lambda x, n: -np.asarray(g0(x, n))) if g0 is not None else None
        out = self.interface_velocity_load(jump=jump, avg2=g1, flux=flux)
        if g0 is not None:
            out += self.interface_pressure_avg_load(lambda x, n: -np.sum(np.asarray(g0(x, n)) * n, axis=1))
        return out

    def interface_pressure_avg_load(self, fn) -> NDArray:
        """``(F, <q>)`` on the interface for scalar ``fn(points, normals)``."""
        k1, k2 = self.params.kappa
        out = np.zeros(self.N)
        for e in self.c.cut_elements():
            e = int(e)
            rule, _, _, psi = self._interface_data(e)
            F = np.asarray(fn(rule.points, rule.normals))
            np.add.at(out, self.pdofs(1, [e])[0], k1 * psi.T @ (rule.weights * F))
            np.add.at(out, self.pdofs(2, [e])[0], k2 * psi.T @ (rule.weights * F))
        return out

    def to_coo_text(self, K: sp.spmatrix, path) -> None:
        """Matrix in ``i j value`` text form (debug export)."""
        C = sp.coo_matrix(K)
        order = np.lexsort((C.col, C.row))
        np.savetxt(path, np.column_stack([C.row[order], C.col[order], C.data[order]]), fmt=["%d", "%d", "%.17g"])


@dataclass
class SaddleSystem:
    """Square system with strongly imposed Dirichlet unknowns.

    ``fixed`` holds the constrained unknown indices and ``fixed_values``
    their values; :meth:`solve` eliminates them.
    """

    matrix: sp.csr_matrix
    rhs: NDArray[np.float64]
    fixed: NDArray[np.intp]
    fixed_values: NDArray[np.float64]
    refine_steps: int = 2
    accept_residual: float = 1e-8
    #: factorisations tried in turn: a fast symmetric-pattern ordering with
    #: relaxed pivoting first, then full partial pivoting
    factor_options: tuple[dict, ...] = (
        {"permc_spec": "MMD_AT_PLUS_A", "diag_pivot_thresh": 0.01, "options": {"SymmetricMode": True}},
        {"permc_spec": "COLAMD"},
    )

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def solve(self) -> tuple[NDArray[np.float64], float]:
        """Direct solve; returns the full vector and the relative residual on free rows."""
        from scipy.sparse.linalg import splu

        n = self.size
        free = np.ones(n, dtype=bool)
        free[self.fixed] = False
        fi = np.nonzero(free)[0]
        x = np.zeros(n)
        x[self.fixed] = self.fixed_values
        K = self.matrix
        Kff = K[fi][:, fi].tocsc()
        rhs = self.rhs[fi] - K[fi][:, self.fixed] @ self.fixed_values
        xf = None
        rel = float("inf")
        for opts in self.factor_options:
            try:
                lu = splu(Kff, **opts)
            except RuntimeError:
                continue
            xf = lu.solve(rhs)
            for _ in range(self.refine_steps):
                r = rhs - Kff @ xf
                xf = xf + lu.solve(r)
            if np.all(np.isfinite(xf)):
                rel = float(np.linalg.norm(Kff @ xf - rhs) / max(np.linalg.norm(rhs), 1e-300))
                if rel < self.accept_residual:
                    break
        if xf is None:
            raise SolverError("system matrix is singular")
        if not np.all(np.isfinite(xf)):
            raise SolverError("direct solve produced non-finite values")
        x[fi] = xf
        return x, rel
