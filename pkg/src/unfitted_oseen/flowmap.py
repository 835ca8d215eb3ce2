"""Discrete flow maps of the advection ODE ``dx/dt = w(x, t)``.

One time step ``t_{m-1} -> t_m`` is an explicit Runge-Kutta step of order
``k + 1``.  Multi-step maps are compositions of one-step maps, and their
inverses are computed by Newton's method on each one-step map with the
exact Jacobian of the discrete map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction as F
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import FlowMapError


@dataclass(frozen=True)
class RKTableau:
    """Explicit Runge-Kutta tableau (strictly lower-triangular ``a``)."""

    name: str
    a: tuple[tuple[F, ...], ...]
    b: tuple[F, ...]
    c: tuple[F, ...]
    order: int

    @property
    def stages(self) -> int:
        return len(self.b)

    @property
    def a_array(self) -> NDArray[np.float64]:
        return np.array([[float(v) for v in row] for row in self.a])

    @property
    def b_array(self) -> NDArray[np.float64]:
        return np.array([float(v) for v in self.b])

    @property
    def c_array(self) -> NDArray[np.float64]:
        return np.array([float(v) for v in self.c])

    def to_json(self) -> str:
        return json.dumps(
            {
                "name": self.name,
                "order": self.order,
                "a": [[str(v) for v in row] for row in self.a],
                "b": [str(v) for v in self.b],
                "c": [str(v) for v in self.c],
            }
        )


def _tab(name, a, b, c, order) -> RKTableau:
    s = len(b)
    full = tuple(tuple(F(a[i][j]) if j < len(a[i]) else F(0) for j in range(s)) for i in range(s))
    return RKTableau(name, full, tuple(F(v) for v in b), tuple(F(v) for v in c), order)


RK3_KUTTA = _tab(
    "rk3-kutta",
    [[], [F(1, 2)], [-1, 2]],
    [F(1, 6), F(2, 3), F(1, 6)],
    [0, F(1, 2), 1],
    3,
)

RK4_CLASSIC = _tab(
    "rk4-classic",
    [[], [F(1, 2)], [0, F(1, 2)], [0, 0, 1]],
    [F(1, 6), F(1, 3), F(1, 3), F(1, 6)],
    [0, F(1, 2), F(1, 2), 1],
    4,
)

RK5_BUTCHER = _tab(
    "rk5-butcher",
    [
        [],
        [F(1, 4)],
        [F(1, 8), F(1, 8)],
        [0, F(-1, 2), 1],
        [F(3, 16), 0, 0, F(9, 16)],
        [F(-3, 7), F(2, 7), F(12, 7), F(-12, 7), F(8, 7)],
    ],
    [F(7, 90), 0, F(32, 90), F(12, 90), F(32, 90), F(7, 90)],
    [0, F(1, 4), F(1, 4), F(1, 2), F(3, 4), 1],
    5,
)

TABLEAUS = {t.name: t for t in (RK3_KUTTA, RK4_CLASSIC, RK5_BUTCHER)}


def tableau_for(k: int) -> RKTableau:
    """The RK-(k+1) tableau used with the order-``k`` scheme."""
    return {2: RK3_KUTTA, 3: RK4_CLASSIC, 4: RK5_BUTCHER}[k]


@dataclass(frozen=True)
class VelocityField:
    """Advection velocity ``w(x, t)`` and its spatial gradient.

    Both callables are vectorised over leading axes of ``x`` (shape
    ``(..., 2)``); ``grad`` returns ``(..., 2, 2)`` with ``grad[..., i, j] =
    d w_i / d x_j``.
    """

    w: Callable[[NDArray, float], NDArray]
    grad: Callable[[NDArray, float], NDArray]
    name: str = "custom"


def _zero_w(x, t):
    return np.zeros_like(np.asarray(x, dtype=float))


def _zero_grad(x, t):
    x = np.asarray(x, dtype=float)
    return np.zeros(x.shape + (2,))


ZERO_FIELD = VelocityField(_zero_w, _zero_grad, "zero")


def rotation_field(omega: float = 1.0, center=(0.0, 0.0)) -> VelocityField:
    """Rigid rotation ``w = omega * (x2 - c2, -(x1 - c1))`` (clockwise)."""
    c = np.asarray(center, dtype=float)

    def w(x, t):
        d = np.asarray(x, dtype=float) - c
        return omega * np.stack([d[..., 1], -d[..., 0]], axis=-1)

    def grad(x, t):
        x = np.asarray(x, dtype=float)
        g = np.zeros(x.shape + (2,))
        g[..., 0, 1] = omega
        g[..., 1, 0] = -omega
        return g

    return VelocityField(w, grad, "rotation")


def exact_rotation(x: ArrayLike, t: float, omega: float = 1.0, center=(0.0, 0.0)) -> NDArray:
    """Exact flow of :func:`rotation_field` over time ``t``."""
    c = np.asarray(center, dtype=float)
    d = np.asarray(x, dtype=float) - c
    ct, st = np.cos(omega * t), np.sin(omega * t)
    return c + np.stack([ct * d[..., 0] + st * d[..., 1], -st * d[..., 0] + ct * d[..., 1]], axis=-1)


def _step(x, t0, tau, tab: RKTableau, field: VelocityField, jac: bool):
    a, b, c = tab.a_array, tab.b_array, tab.c_array
    x = np.asarray(x, dtype=float)
    ks, gs, dphis = [], [], []
    eye = np.broadcast_to(np.eye(2), x.shape + (2,))
    out = x.copy()
    jout = eye.copy() if jac else None
    for i in range(tab.stages):
        xi = x.copy()
        dphi = eye.copy() if jac else None
        for j in range(i):
            if a[i, j] != 0.0:
                xi = xi + tau * a[i, j] * ks[j]
                if jac:
                    dphi = dphi + tau * a[i, j] * (gs[j] @ dphis[j])
        ti = t0 + c[i] * tau
        ki = field.w(xi, ti)
        ks.append(ki)
        if b[i] != 0.0:
            out = out + tau * b[i] * ki
        if jac:
            gi = field.grad(xi, ti)
            gs.append(gi)
            dphis.append(dphi)
            if b[i] != 0.0:
                jout = jout + tau * b[i] * (gi @ dphi)
    return out, jout


def advance_point(x: ArrayLike, t0: float, tau: float, tab: RKTableau, field: VelocityField) -> NDArray:
    """One RK step of the flow from ``t0`` to ``t0 + tau``."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    return _step(x, t0, tau, tab, field, jac=False)[0]


def jacobian(x: ArrayLike, t0: float, tau: float, tab: RKTableau, field: VelocityField) -> NDArray:
    """Exact Jacobian of the discrete one-step map via the stage recursion."""
    return _step(x, t0, tau, tab, field, jac=True)[1]


@dataclass(frozen=True)
class OneStepMap:
    """The discrete map from ``t0`` to ``t0 + tau``."""

    t0: float
    tau: float
    tab: RKTableau
    field: VelocityField

    def __call__(self, x):
        return _step(x, self.t0, self.tau, self.tab, self.field, jac=False)[0]

    def with_jacobian(self, x):
        return _step(x, self.t0, self.tau, self.tab, self.field, jac=True)

    def inverse(self, y, tol: float, maxit: int = 50):
        """Solve ``self(x) = y`` by damped Newton for every point in ``y``."""
        with np.errstate(over="ignore", invalid="ignore"):
            return self._inverse(y, tol, maxit)

    def _inverse(self, y, tol, maxit):
        y = np.asarray(y, dtype=float)
        shape = y.shape
        y = y.reshape(-1, 2)
        # backward RK step with reversed time as initial guess
        x = _step(y, self.t0 + self.tau, -self.tau, self.tab, self.field, jac=False)[0]
        fx, jx = self.with_jacobian(x)
        r = fx - y
        rn = np.linalg.norm(r, axis=1)
        active = ~(rn < tol)  # NaN counts as unconverged
        it = 0
        while np.any(active):
            if it >= maxit:
                bad = np.nonzero(active)[0]
                raise FlowMapError(
                    f"Newton inversion failed for {len(bad)} points after {maxit} iterations; "
                    f"first y={y[bad[0]].tolist()} residual={rn[bad[0]]:.3e}"
                )
            idx = np.nonzero(active)[0]
            dx = -np.linalg.solve(jx[idx], r[idx][..., None])[..., 0]
            step = np.ones(len(idx))
            xa = x[idx]
            for _ in range(30):
                xn = xa + step[:, None] * dx
                fn, jn = self.with_jacobian(xn)
                rnew = fn - y[idx]
                nn = np.linalg.norm(rnew, axis=1)
                worse = ~(nn <= rn[idx])
                if not np.any(worse):
                    break
                step = np.where(worse, 0.5 * step, step)
            x[idx], r[idx], rn[idx], jx[idx] = xn, rnew, nn, jn
            active[idx] = ~(nn < tol)
            it += 1
        # one polishing step: quadratic convergence takes the residual from
        # ~tol down to rounding level at negligible cost
        xn = x - np.linalg.solve(jx, r[..., None])[..., 0]
        better = np.linalg.norm(self(xn) - y, axis=1) <= rn
        x[better] = xn[better]
        return x.reshape(shape)


@dataclass
class FlowMapStack:
    """The most recent one-step maps, keyed by the index of their end step.

    ``maps[m]`` advances from ``t_{m-1}`` to ``t_m``.  Only the last ``depth``
    maps are kept.
    """

    depth: int
    diameter: float = float(np.sqrt(2.0))
    maps: dict[int, OneStepMap] = field(default_factory=dict)

    def push(self, m: int, step_map: OneStepMap) -> None:
        self.maps[m] = step_map
        for key in sorted(self.maps):
            if key <= m - self.depth:
                del self.maps[key]

    def _get(self, m: int) -> OneStepMap:
        try:
            return self.maps[m]
        except KeyError:
            raise FlowMapError(f"flow map for step {m} is not in the stack") from None

    @property
    def tol(self) -> float:
        return 1e-12 * self.diameter

    def forward_multi(self, x: ArrayLike, m: int, n: int) -> NDArray:
        """Apply ``X^{n-1,n} o ... o X^{m,m+1}`` to ``x``."""
        if m > n:
            raise FlowMapError("forward map requires m <= n")
        x = np.asarray(x, dtype=float)
        for s in range(m + 1, n + 1):
            x = self._get(s)(x)
        return x

    def forward_jacobian(self, x: ArrayLike, m: int, n: int) -> tuple[NDArray, NDArray]:
        """Image and Jacobian of the multi-step forward map at ``x``."""
        x = np.asarray(x, dtype=float)
        jac = np.broadcast_to(np.eye(2), x.shape + (2,)).copy()
        for s in range(m + 1, n + 1):
            x, js = self._get(s).with_jacobian(x)
            jac = js @ jac
        return x, jac

    def inverse_map(self, y: ArrayLike, m: int, n: int) -> NDArray:
        """Preimage ``X^{n,m}(y)`` by successive one-step Newton inversions."""
        if m > n:
            raise FlowMapError("inverse map requires m <= n")
        x = np.asarray(y, dtype=float)
        for s in range(n, m, -1):
            x = self._get(s).inverse(x, self.tol)
        return x

    def preimages(self, y: ArrayLike, n: int, count: int) -> list[NDArray]:
        """``[X^{n,n-1}(y), X^{n,n-2}(y), ..., X^{n,n-count}(y)]`` sharing work."""
        out = []
        x = np.asarray(y, dtype=float)
        for s in range(n, n - count, -1):
            x = self._get(s).inverse(x, self.tol)
            out.append(x)
        return out
