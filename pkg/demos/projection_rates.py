"""L2 error of the Stokes projection of smooth two-phase data.

Usage::

    python demos/projection_rates.py --k 2 --levels 16 32 64

Compares the projection error with the nodal interpolation error of the same
data; on coarse meshes the ghost-penalty contribution dominates and the
observed rate exceeds ``k + 1`` before settling.
"""

from __future__ import annotations

import argparse

import numpy as np
from numpy.polynomial import polynomial as P

from unfitted_oseen.assembly import PenaltyParams
from unfitted_oseen.cases import ManufacturedOseenCase
from unfitted_oseen.fespace import interpolate
from unfitted_oseen.harness import eoc
from unfitted_oseen.mesh import StructuredMesh
from unfitted_oseen.solver import Geometry, error_terms, initial_markers, stokes_projection


class PolynomialData:
    """Divergence-free velocity ``curl psi_i`` and pressure ``q_i`` per phase."""

    def __init__(self, k: int):
        d = k + 2
        psi1, psi2 = np.zeros((d + 1, d + 1)), np.zeros((d + 1, d + 1))
        psi1[d, 0], psi1[1, d - 1] = 1.0, 1.0
        psi2[0, d], psi2[1, 1] = 1.0, 2.0
        q1, q2 = np.zeros((k + 1, k + 1)), np.zeros((k + 1, k + 1))
        q1[k, 0], q2[0, k] = 1.0, 1.0
        self.vel = {i: [P.polyder(c, axis=1), -P.polyder(c, axis=0)] for i, c in ((1, psi1), (2, psi2))}
        self.q = {1: q1, 2: q2}

    def velocity(self, i, X, t=0.0):
        return np.stack([P.polyval2d(X[..., 0], X[..., 1], c) for c in self.vel[i]], axis=-1)

    def velocity_grad(self, i, X, t=0.0):
        return np.stack([np.stack([P.polyval2d(X[..., 0], X[..., 1], P.polyder(c, axis=a)) for a in (0, 1)], axis=-1)
                         for c in self.vel[i]], axis=-2)

    def pressure(self, i, X, t=0.0):
        return P.polyval2d(X[..., 0], X[..., 1], self.q[i])

    def pressure_grad(self, i, X, t=0.0):
        return np.stack([P.polyval2d(X[..., 0], X[..., 1], P.polyder(self.q[i], axis=a)) for a in (0, 1)], axis=-1)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, default=2, choices=(2, 3, 4))
    ap.add_argument("--levels", type=int, nargs="+", default=[8, 16, 32])
    args = ap.parse_args()
    data, k = PolynomialData(args.k), args.k
    rows = []
    for nc in args.levels:
        g = Geometry.build(0, 0.0, initial_markers(ManufacturedOseenCase(), 0.125 / nc), StructuredMesh(nc), k, PenaltyParams())
        _, _, x, _ = stokes_projection(g.asm, data.velocity, data.velocity_grad, data.pressure)
        ui = interpolate((lambda X: data.velocity(1, X), lambda X: data.velocity(2, X)), g.asm.c, k)
        pi = interpolate((lambda X: data.pressure(1, X), lambda X: data.pressure(2, X)), g.asm.c, k - 1)
        xi = g.asm.dofs.gather(ui, pi)
        rows.append((nc, np.sqrt(error_terms(g.asm, x, data, 0.0)["u0"]), np.sqrt(error_terms(g.asm, xi, data, 0.0)["u0"])))
    fmt = lambda v: "---" if v is None else f"{v:.2f}"  # noqa: E731
    print(f"{'nc':>5} {'projection':>12} {'order':>6} {'interpolant':>12} {'order':>6}")
    for j, (nc, ep, ei) in enumerate(rows):
        op = eoc(rows[j - 1][1], ep) if j else None
        oi = eoc(rows[j - 1][2], ei) if j else None
        print(f"{nc:5d} {ep:12.3e} {fmt(op):>6} {ei:12.3e} {fmt(oi):>6}")

if __name__ == "__main__":
    main()
