"""Analytic test problems: exact phase solutions, advection fields and data.

A case provides, for each phase ``i``, the exact velocity and pressure with
their derivatives.  The body force ``f_i = du/dt + (w . grad) u - nu_i lap u
+ grad p`` and the interface jumps are derived from them generically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .flowmap import ZERO_FIELD, VelocityField

PI = np.pi


def _xy(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1]


def vortex_field(reversal: float = 3.0) -> VelocityField:
    """Swirling field ``cos(pi t / reversal) (sin^2(pi x) sin(2 pi y), -sin^2(pi y) sin(2 pi x))``.

    Divergence free and zero on the boundary of the unit square; the swirl
    stops at ``t = reversal / 2`` and reverses afterwards.
    """

    def w(x, t):
        X, Y = _xy(x)
        c = np.cos(PI * t / reversal)
        return c * np.stack([np.sin(PI * X) ** 2 * np.sin(2 * PI * Y), -np.sin(PI * Y) ** 2 * np.sin(2 * PI * X)], axis=-1)

    def grad(x, t):
        X, Y = _xy(x)
        c = np.cos(PI * t / reversal)
        g = np.empty(np.shape(X) + (2, 2))
        g[..., 0, 0] = c * PI * np.sin(2 * PI * X) * np.sin(2 * PI * Y)
        g[..., 0, 1] = c * 2 * PI * np.sin(PI * X) ** 2 * np.cos(2 * PI * Y)
        g[..., 1, 0] = -c * 2 * PI * np.sin(PI * Y) ** 2 * np.cos(2 * PI * X)
        g[..., 1, 1] = -c * PI * np.sin(2 * PI * Y) * np.sin(2 * PI * X)
        return g

    return VelocityField(w, grad, "vortex")


class Case:
    """Base class; subclasses define the exact fields of both phases."""

    name = "case"
    nu: tuple[float, float] = (1.0, 1.0e-3)
    field: VelocityField = ZERO_FIELD
    center: tuple[float, float] = (0.5, 0.75)
    radius: float = 0.15
    T: float = 1.5

    # -- to be provided -------------------------------------------------
    def velocity(self, i: int, x, t: float) -> NDArray:
        raise NotImplementedError

    def velocity_grad(self, i: int, x, t: float) -> NDArray:
        """``g[..., c, d] = d u_c / d x_d``."""
        raise NotImplementedError

    def velocity_lap(self, i: int, x, t: float) -> NDArray:
        raise NotImplementedError

    def velocity_dt(self, i: int, x, t: float) -> NDArray:
        raise NotImplementedError

    def pressure(self, i: int, x, t: float) -> NDArray:
        raise NotImplementedError

    def pressure_grad(self, i: int, x, t: float) -> NDArray:
        raise NotImplementedError

    # -- derived --------------------------------------------------------
    def forcing(self, i: int, x, t: float) -> NDArray:
        w = self.field.w(x, t)
        conv = np.einsum("...cd,...d->...c", self.velocity_grad(i, x, t), w)
        return (self.velocity_dt(i, x, t) + conv - self.nu[i - 1] * self.velocity_lap(i, x, t)
                + self.pressure_grad(i, x, t))

    def g0(self, x, n, t: float) -> NDArray:
        """Velocity jump ``u1 - u2``."""
        return self.velocity(1, x, t) - self.velocity(2, x, t)

    def g1(self, x, n, t: float) -> NDArray:
        """Traction jump ``nu1 d_n u1 - nu2 d_n u2 - (p1 - p2) n``."""
        n = np.asarray(n, dtype=float)
        d1 = np.einsum("...cd,...d->...c", self.velocity_grad(1, x, t), n)
        d2 = np.einsum("...cd,...d->...c", self.velocity_grad(2, x, t), n)
        dp = self.pressure(1, x, t) - self.pressure(2, x, t)
        return self.nu[0] * d1 - self.nu[1] * d2 - dp[..., None] * n

    def curve(self, s):
        """Initial interface as a function of arclength (counter-clockwise circle)."""
        s = np.asarray(s, dtype=float)
        a = s / self.radius
        return np.stack([self.center[0] + self.radius * np.cos(a), self.center[1] + self.radius * np.sin(a)], axis=-1)

    @property
    def perimeter(self) -> float:
        return 2.0 * PI * self.radius


class ManufacturedOseenCase(Case):
    """Two-phase Oseen flow around a disk stretched by the swirling field."""

    name = "manufactured"

    def __init__(self, nu=(1.0, 1.0e-3), T: float = 1.5):
        self.nu = tuple(nu)
        self.T = T
        self.field = vortex_field()

    def velocity(self, i, x, t):
        X, Y = _xy(x)
        if i == 1:
            return np.cos(t) * np.stack([np.cos(PI * X) * np.sin(PI * Y), -np.sin(PI * X) * np.cos(PI * Y)], axis=-1)
        a = PI * Y + PI * t
        return np.exp(X)[..., None] * np.stack([np.sin(a), np.cos(a) / PI], axis=-1)

    def velocity_grad(self, i, x, t):
        X, Y = _xy(x)
        g = np.empty(np.shape(X) + (2, 2))
        if i == 1:
            c = np.cos(t)
            g[..., 0, 0] = -PI * c * np.sin(PI * X) * np.sin(PI * Y)
            g[..., 0, 1] = PI * c * np.cos(PI * X) * np.cos(PI * Y)
            g[..., 1, 0] = -PI * c * np.cos(PI * X) * np.cos(PI * Y)
            g[..., 1, 1] = PI * c * np.sin(PI * X) * np.sin(PI * Y)
            return g
        a = PI * Y + PI * t
        ex = np.exp(X)
        g[..., 0, 0] = ex * np.sin(a)
        g[..., 0, 1] = PI * ex * np.cos(a)
        g[..., 1, 0] = ex * np.cos(a) / PI
        g[..., 1, 1] = -ex * np.sin(a)
        return g

    def velocity_lap(self, i, x, t):
        X, Y = _xy(x)
        if i == 1:
            return -2.0 * PI**2 * self.velocity(1, x, t)
        a = PI * Y + PI * t
        ex = np.exp(X)
        return np.stack([(1.0 - PI**2) * ex * np.sin(a), (1.0 / PI - PI) * ex * np.cos(a)], axis=-1)

    def velocity_dt(self, i, x, t):
        X, Y = _xy(x)
        if i == 1:
            return -np.sin(t) * np.stack([np.cos(PI * X) * np.sin(PI * Y), -np.sin(PI * X) * np.cos(PI * Y)], axis=-1)
        a = PI * Y + PI * t
        ex = np.exp(X)
        return np.stack([PI * ex * np.cos(a), -ex * np.sin(a)], axis=-1)

    def pressure(self, i, x, t):
        X, Y = _xy(x)
        if i == 1:
            return np.cos(0.5 * PI * X) * np.sin(0.5 * PI * Y)
        return np.sin(0.5 * PI * X) * np.cos(0.5 * PI * Y)

    def pressure_grad(self, i, x, t):
        X, Y = _xy(x)
        h = 0.5 * PI
        if i == 1:
            return np.stack([-h * np.sin(h * X) * np.sin(h * Y), h * np.cos(h * X) * np.cos(h * Y)], axis=-1)
        return np.stack([h * np.cos(h * X) * np.cos(h * Y), -h * np.sin(h * X) * np.sin(h * Y)], axis=-1)


class SteadyPolyCase(Case):
    """Steady polynomial flow ``u = (x^2, -2 x y)``, ``p = x + y``, no advection.

    The same polynomial is used in both phases, so the velocity is continuous
    across the interface while the traction jumps because ``nu1 != nu2``.
    """

    name = "steady-poly"

    def __init__(self, nu=(1.0, 1.0e-3), T: float = 0.25):
        self.nu = tuple(nu)
        self.T = T
        self.field = ZERO_FIELD

    def velocity(self, i, x, t):
        X, Y = _xy(x)
        return np.stack([X**2, -2.0 * X * Y], axis=-1)

    def velocity_grad(self, i, x, t):
        X, Y = _xy(x)
        g = np.zeros(np.shape(X) + (2, 2))
        g[..., 0, 0] = 2.0 * X
        g[..., 1, 0] = -2.0 * Y
        g[..., 1, 1] = -2.0 * X
        return g

    def velocity_lap(self, i, x, t):
        X, _ = _xy(x)
        out = np.zeros(np.shape(X) + (2,))
        out[..., 0] = 2.0
        return out

    def velocity_dt(self, i, x, t):
        X, _ = _xy(x)
        return np.zeros(np.shape(X) + (2,))

    def pressure(self, i, x, t):
        X, Y = _xy(x)
        return X + Y

    def pressure_grad(self, i, x, t):
        X, _ = _xy(x)
        return np.stack([np.ones_like(X), np.ones_like(X)], axis=-1)


class TrackingCase(ManufacturedOseenCase):
    """Interface transport by the swirling field only (no flow solve)."""

    name = "tracking-only"


CASES = {c.name: c for c in (ManufacturedOseenCase, SteadyPolyCase, TrackingCase)}


def make_case(name: str, **kw) -> Case:
    try:
        return CASES[name](**kw)
    except KeyError:
        raise ValueError(f"unknown case {name!r}; choose from {sorted(CASES)}") from None


@dataclass(frozen=True)
class ShiftedPressure:
    """Exact pressure shifted by a constant (to match a mean constraint)."""

    case: Case
    shift: float

    def __call__(self, i, x, t):
        return self.case.pressure(i, x, t) - self.shift
