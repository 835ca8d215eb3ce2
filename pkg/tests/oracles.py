"""Independent oracles shared by several test modules."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from numpy.polynomial import polynomial as P


def rooted_trees(order: int) -> list[tuple]:
    """All rooted trees with ``order`` vertices as canonical nested tuples."""
    if order == 1:
        return [()]
    out = set()

    def partitions(n, max_part):
        if n == 0:
            yield []
            return
        for p in range(min(n, max_part), 0, -1):
            for rest in partitions(n - p, p):
                yield [p] + rest

    for parts in partitions(order - 1, order - 1):
        pools = [rooted_trees(p) for p in parts]

        def combos(i):
            if i == len(pools):
                yield []
                return
            for t in pools[i]:
                for rest in combos(i + 1):
                    yield [t] + rest

        for kids in combos(0):
            out.add(tuple(sorted(kids)))
    return sorted(out)


def tree_size(t) -> int:
    return 1 + sum(tree_size(c) for c in t)


def tree_density(t) -> int:
    g = tree_size(t)
    for c in t:
        g *= tree_density(c)
    return g


def _stage_weights(t, a):
    s = len(a)
    g = [Fraction(1)] * s
    for c in t:
        gc = _stage_weights(c, a)
        ag = [sum(a[i][j] * gc[j] for j in range(s)) for i in range(s)]
        g = [g[i] * ag[i] for i in range(s)]
    return g


def satisfies_order_conditions(tab, order: int) -> bool:
    """Butcher order conditions ``b . Phi(t) = 1 / gamma(t)`` for every tree up to ``order``."""
    for p in range(1, order + 1):
        for t in rooted_trees(p):
            phi = sum(b * g for b, g in zip(tab.b, _stage_weights(t, tab.a)))
            if phi != Fraction(1, tree_density(t)):
                return False
    return True


def bdf_oracle(k: int) -> list[Fraction]:
    """BDF-k coefficients from exactness on ``1, t, ..., t^k`` (exact Gaussian elimination).

    Unknowns ``lam_0..lam_k`` with ``sum_j lam_j (-j)^m = m * 0^(m-1)`` for
    ``m = 0..k`` (samples at ``t = -j``, derivative at ``t = 0``, unit step).
    """
    n = k + 1
    rows = [[Fraction(-j) ** m if (m or j) else Fraction(1) for j in range(n)] + [Fraction(1 if m == 1 else 0)]
            for m in range(n)]
    for c in range(n):
        piv = next(r for r in range(c, n) if rows[r][c] != 0)
        rows[c], rows[piv] = rows[piv], rows[c]
        rows[c] = [v / rows[c][c] for v in rows[c]]
        for r in range(n):
            if r != c and rows[r][c] != 0:
                f = rows[r][c]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[c])]
    return [rows[j][n] for j in range(n)]


class StreamPolynomialPair:
    """Smooth two-phase data from polynomial stream functions and pressures.

    Phase ``i`` has velocity ``curl psi_i`` (divergence free by construction)
    and pressure ``q_i``; both are given as coefficient matrices
    ``C[a, b]`` of ``x^a y^b``.  Derivatives come from
    :mod:`numpy.polynomial`, independent of the package.
    """

    def __init__(self, psi: dict, q: dict):
        self.vel = {i: [P.polyder(c, axis=1), -P.polyder(c, axis=0)] for i, c in psi.items()}
        self.q = q

    def _ev(self, c, X):
        return P.polyval2d(X[..., 0], X[..., 1], c)

    def velocity(self, i, X, t=0.0):
        return np.stack([self._ev(c, X) for c in self.vel[i]], axis=-1)

    def velocity_grad(self, i, X, t=0.0):
        return np.stack([np.stack([self._ev(P.polyder(c, axis=a), X) for a in (0, 1)], axis=-1)
                         for c in self.vel[i]], axis=-2)

    def pressure(self, i, X, t=0.0):
        return self._ev(self.q[i], X)

    def pressure_grad(self, i, X, t=0.0):
        return np.stack([self._ev(P.polyder(self.q[i], axis=a), X) for a in (0, 1)], axis=-1)

    @classmethod
    def of_degree(cls, k: int) -> "StreamPolynomialPair":
        """Velocity of degree ``k + 1`` and pressure of degree ``k`` in each phase, with interface jumps."""
        d = k + 2
        c1 = np.zeros((d + 1, d + 1))
        c1[d, 0], c1[1, d - 1], c1[2, 2] = 1.0, 1.0, 0.5
        c2 = np.zeros((d + 1, d + 1))
        c2[0, d], c2[d - 1, 1], c2[1, 1] = 1.0, -1.0, 2.0
        q1 = np.zeros((k + 1, k + 1))
        q1[k, 0], q1[0, 1] = 1.0, -1.0
        q2 = np.zeros((k + 1, k + 1))
        q2[0, k], q2[1, 0] = 1.0, 1.0
        return cls({1: c1, 2: c2}, {1: q1, 2: q2})
