"""Quadrature on cut cells, on interface arcs and on grid edges.

A phase region inside a cut cell is bounded by closed loops made of straight
pieces of the cell boundary and arcs of the spline.  Each loop is integrated
by fanning it out from one of its vertices ``V``: a boundary piece ``A(t)``
contributes the region ``V + r (A(t) - V)``, ``0 <= r <= 1``, whose Jacobian
is ``r (A - V) x A'``.  Since the cell is convex and ``V`` lies on its
boundary, every fan stays inside the cell.  A vertex is accepted when all
resulting weights are positive (the loop is star-shaped from it); otherwise
the cell is split into quadrants and the construction repeated.  Spline arcs
are split at the spline knots so every Gauss rule sees a single cubic piece.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

from .errors import QuadratureError
from .geometry import SideTag, SplineInterface
from .mesh import Classification

logger = logging.getLogger(__name__)

MAX_DEPTH = 12


@lru_cache(maxsize=None)
def gauss01(n: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Gauss-Legendre points and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


@dataclass(frozen=True)
class VolumeRule:
    element: int
    phase: int
    points: NDArray[np.float64]
    weights: NDArray[np.float64]

    @property
    def measure(self) -> float:
        return float(self.weights.sum())


@dataclass(frozen=True)
class InterfaceRule:
    element: int
    points: NDArray[np.float64]
    weights: NDArray[np.float64]
    normals: NDArray[np.float64]
    params: NDArray[np.float64]

    @property
    def length(self) -> float:
        return float(self.weights.sum())


@dataclass(frozen=True)
class EdgeRule:
    """Gauss rule on a grid edge with the edge normal (``+x`` or ``+y``)."""

    points: NDArray[np.float64]
    weights: NDArray[np.float64]
    normal: NDArray[np.float64]


def integrate(rule, f) -> float:
    """``sum_q w_q f(x_q)`` for any rule with ``points`` and ``weights``."""
    vals = np.asarray(f(rule.points), dtype=float)
    return float(np.sum(rule.weights * vals))


def tensor_rule(origin, size: float, n: int) -> tuple[NDArray, NDArray]:
    x, w = gauss01(n)
    px, py = np.meshgrid(x, x, indexing="xy")
    pts = np.asarray(origin, dtype=float) + size * np.stack([px.ravel(), py.ravel()], axis=1)
    wts = size * size * np.outer(w, w).ravel()
    return pts, wts


def edge_rule(a, b, n: int) -> EdgeRule:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x, w = gauss01(n)
    e = b - a
    length = float(np.hypot(*e))
    normal = np.array([1.0, 0.0]) if abs(e[0]) < abs(e[1]) else np.array([0.0, 1.0])
    return EdgeRule(a + x[:, None] * e, w * length, normal)


# ---- loops ----------------------------------------------------------------

def _bparam(q: NDArray) -> float:
    """Counter-clockwise perimeter coordinate in [0, 4) of a boundary point
    given in unit-square coordinates."""
    d = [abs(q[1]), abs(1.0 - q[0]), abs(1.0 - q[1]), abs(q[0])]
    side = int(np.argmin(d))
    s = (q[0], 1.0 + q[1], 2.0 + (1.0 - q[0]), 3.0 + (1.0 - q[1]))[side]
    return float(np.clip(s, side, side + 1)) % 4.0


_CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def _knot_breaks(spline: SplineInterface, a: float, b: float) -> NDArray:
    """Parameters ``a = u_0, ..., u_m = b`` including every knot strictly between."""
    lo, hi = min(a, b), max(a, b)
    per = spline.period
    ks = spline.knots[:-1]
    start = np.floor(lo / per)
    inner = []
    for shift in (start, start + 1):
        cand = ks + shift * per
        inner.append(cand[(cand > lo) & (cand < hi)])
    inner = np.concatenate(inner)
    pts = np.concatenate([[lo], np.sort(inner), [hi]])
    # drop breaks that would create pieces too short to matter
    keep = np.concatenate([[True], np.diff(pts) > 1e-14 * per])
    pts = pts[keep]
    pts[-1] = hi
    return pts if a <= b else pts[::-1]


def _piece_samples(spline: SplineInterface, piece, ts: NDArray) -> tuple[NDArray, NDArray]:
    """Boundary points ``A`` and tangents ``dA/dt`` of one loop piece at local ``ts``."""
    if piece[0] == "line":
        p, q = piece[1], piece[2]
        return p + ts[:, None] * (q - p), np.broadcast_to(q - p, (len(ts), 2))
    u0, u1 = piece[1], piece[2]
    u = u0 + ts * (u1 - u0)
    return spline.eval(u), spline.eval(u, 1) * (u1 - u0)


def _build_loops(spline, origin, size, arcs, forward: bool):
    """Closed loops (lists of pieces) bounding one phase inside a box.

    ``arcs`` are ``(l0, l1, p0, p1)`` in curve direction.  With
    ``forward=True`` they are traversed as given, otherwise reversed; the
    enclosed region is on the left of the loop in both cases.
    """
    o = np.asarray(origin, dtype=float)
    items = []
    for l0, l1, p0, p1 in arcs:
        if forward:
            items.append((l0, l1, p0, p1))
        else:
            items.append((l1, l0, p1, p0))
    s_in = [_bparam((it[2] - o) / size) for it in items]
    s_out = [_bparam((it[3] - o) / size) for it in items]
    used = [False] * len(items)
    loops = []
    for start in range(len(items)):
        if used[start]:
            continue
        loop = []
        a = start
        for _ in range(len(items) + 1):
            used[a] = True
            for u0, u1 in _arc_split(spline, items[a][0], items[a][1]):
                loop.append(("arc", u0, u1))
            d = np.array([(s - s_out[a]) % 4.0 for s in s_in])
            d[d > 4.0 - 1e-12] = 0.0
            b = int(np.argmin(d))
            # walk counter-clockwise along the box boundary
            cur = items[a][3]
            c = np.floor(s_out[a]) + 1.0
            while c < s_out[a] + d[b] - 1e-14:
                corner = o + size * _CORNERS[int(c) % 4]
                if np.linalg.norm(corner - cur) > 1e-15 * size:
                    loop.append(("line", cur, corner))
                cur = corner
                c += 1.0
            end = items[b][2]
            if np.linalg.norm(end - cur) > 1e-15 * size:
                loop.append(("line", cur, end))
            if b == start:
                break
            if used[b]:
                raise QuadratureError("inconsistent interface arcs inside a cell")
            a = b
        else:
            raise QuadratureError("interface loop does not close")
        loops.append(loop)
    return loops


def _arc_split(spline, l0, l1):
    br = _knot_breaks(spline, l0, l1)
    return list(zip(br[:-1], br[1:]))


def _piece_start(spline, piece) -> NDArray:
    if piece[0] == "line":
        return piece[1]
    return spline.eval(piece[1])


def _fan(spline, loop, V, n):
    t, wt = gauss01(n)
    r, wr = gauss01(n)
    pts, wts = [], []
    for piece in loop:
        if piece[0] == "line":
            d1 = piece[1] - V
            d2 = piece[2] - V
            if abs(d1[0] * d2[1] - d1[1] * d2[0]) <= 1e-15 * (np.dot(d1, d1) + np.dot(d2, d2)):
                continue  # collinear with V: zero area
        A, dA = _piece_samples(spline, piece, t)
        rel = A - V
        jac = rel[:, 0] * dA[:, 1] - rel[:, 1] * dA[:, 0]
        p = V + r[None, :, None] * rel[:, None, :]
        w = (wt * jac)[:, None] * (wr * r)[None, :]
        pts.append(p.reshape(-1, 2))
        wts.append(w.ravel())
    if not pts:
        return np.zeros((0, 2)), np.zeros(0)
    return np.vstack(pts), np.concatenate(wts)


def _loop_rule(spline, loop, n):
    """Fan rule of one loop from the first vertex giving positive weights."""
    best = None
    for piece in loop:
        V = _piece_start(spline, piece)
        p, w = _fan(spline, loop, V, n)
        if len(w) == 0:
            continue
        if np.all(w > 0.0):
            return p, w
        mn = w.min() / max(np.abs(w).max(), 1e-300)
        if best is None or mn > best[0]:
            best = (mn, p, w)
    return None


def _split_arcs_at(spline, arcs, axis, c, lo, hi):
    """Split arcs at their crossings with the line ``x[axis] = c``."""
    a = np.array([c, lo]) if axis == 0 else np.array([lo, c])
    b = np.array([c, hi]) if axis == 0 else np.array([hi, c])
    per = spline.period
    out = []
    for l0, l1, p0, p1 in arcs:
        cuts = []
        for l, p, _ in spline.line_intersections(a, b):
            # bring l into the (possibly wrapped) interval of this arc
            l = l + per * np.floor((l0 - l) / per + 1.0) if l < l0 else l
            while l - per > l0:
                l -= per
            if l0 + 1e-14 * per < l < l1 - 1e-14 * per:
                p = p.copy()
                p[axis] = c
                cuts.append((l, p))
        cuts.sort(key=lambda x: x[0])
        prev_l, prev_p = l0, p0
        for l, p in cuts:
            out.append((prev_l, l, prev_p, p))
            prev_l, prev_p = l, p
        out.append((prev_l, l1, prev_p, p1))
    return out


def _box_rules(spline, origin, size, arcs, phase, forward, n, depth):
    """Points and weights for one phase in a box crossed by ``arcs``."""
    if not arcs:
        c = np.asarray(origin) + 0.5 * size
        if int(spline.side_of(c)) == phase:
            return tensor_rule(origin, size, n)
        return np.zeros((0, 2)), np.zeros(0)
    loops = _build_loops(spline, origin, size, arcs, forward)
    pts, wts = [], []
    ok = True
    for loop in loops:
        res = _loop_rule(spline, loop, n)
        if res is None:
            ok = False
            break
        pts.append(res[0])
        wts.append(res[1])
    if ok:
        return np.vstack(pts), np.concatenate(wts)
    if depth >= MAX_DEPTH:
        raise QuadratureError(f"no valid cut-cell rule after {MAX_DEPTH} subdivisions at {origin}")
    if depth == 0:
        logger.debug("cut cell at %s is not star-shaped; subdividing", np.asarray(origin).tolist())
    half = 0.5 * size
    o = np.asarray(origin, dtype=float)
    sub = _split_arcs_at(spline, arcs, 0, o[0] + half, o[1] - size, o[1] + 2 * size)
    sub = _split_arcs_at(spline, sub, 1, o[1] + half, o[0] - size, o[0] + 2 * size)
    children: dict[int, list] = {0: [], 1: [], 2: [], 3: []}
    for l0, l1, p0, p1 in sub:
        if l1 - l0 <= 1e-13 * spline.period:
            continue
        m = spline.eval(0.5 * (l0 + l1))
        ci = 1 if m[0] > o[0] + half else 0
        cj = 1 if m[1] >= o[1] + half else 0
        children[2 * cj + ci].append((l0, l1, p0, p1))
    pts, wts = [], []
    for idx in range(4):
        co = o + half * np.array([idx % 2, idx // 2])
        p, w = _box_rules(spline, co, half, children[idx], phase, forward, n, depth + 1)
        pts.append(p)
        wts.append(w)
    return np.vstack(pts), np.concatenate(wts)


def build_volume_rules(c: Classification, e: int, n: int) -> tuple[VolumeRule, VolumeRule]:
    """Phase-1 and phase-2 rules of element ``e`` with ``n`` Gauss points per direction."""
    mesh = c.mesh
    o = mesh.element_origin(e)
    if not c.cut[e]:
        p, w = tensor_rule(o, mesh.h, n)
        empty = (np.zeros((0, 2)), np.zeros(0))
        r1 = (p, w) if c.phase[e] == 1 else empty
        r2 = (p, w) if c.phase[e] == 2 else empty
        return VolumeRule(e, 1, *r1), VolumeRule(e, 2, *r2)
    spline = c.spline
    arcs = [(a.l0, a.l1, a.p0, a.p1) for a in c.arcs[e]]
    if len(arcs) > 4:
        raise QuadratureError(f"element {e} is crossed by {len(arcs)} arcs; the mesh is too coarse")
    # phase 1 lies to the left of a counter-clockwise curve
    fwd1 = bool(spline.ccw)
    out = []
    for phase, fwd in ((1, fwd1), (2, not fwd1)):
        p, w = _box_rules(spline, o, mesh.h, arcs, phase, fwd, n, 0)
        out.append(VolumeRule(e, phase, p, w))
    return out[0], out[1]


def build_interface_rule(c: Classification, e: int, n: int) -> InterfaceRule:
    """Gauss rule in the curve parameter on every arc inside element ``e``."""
    if e not in c.arcs:
        raise QuadratureError(f"element {e} is not cut")
    spline = c.spline
    x, w = gauss01(n)
    ls, ws = [], []
    for arc in c.arcs[e]:
        for u0, u1 in _arc_split(spline, arc.l0, arc.l1):
            ls.append(u0 + x * (u1 - u0))
            ws.append(w * (u1 - u0))
    l = np.concatenate(ls)
    wl = np.concatenate(ws)
    speed = np.linalg.norm(spline.eval(l, 1), axis=1)
    return InterfaceRule(e, spline.eval(l), wl * speed, spline.unit_normal(l), np.mod(l, spline.period))


class CutQuadrature:
    """All cut-cell and interface rules of one classification.

    Args:
        c: the classification.
        n_vol: Gauss points per direction in every fan (and uncut cell).
        n_if: Gauss points per cubic piece of the interface.
    """

    def __init__(self, c: Classification, n_vol: int, n_if: int):
        self.classification = c
        self.n_vol = n_vol
        self.n_if = n_if
        self.volume: dict[int, tuple[VolumeRule, VolumeRule]] = {}
        self.interface: dict[int, InterfaceRule] = {}
        for e in c.cut_elements():
            e = int(e)
            self.volume[e] = build_volume_rules(c, e, n_vol)
            self.interface[e] = build_interface_rule(c, e, n_if)

    def phase_rule(self, e: int, phase: int) -> VolumeRule:
        if e in self.volume:
            return self.volume[e][phase - 1]
        return build_volume_rules(self.classification, e, self.n_vol)[phase - 1]

    def area(self, phase: int) -> float:
        """Measure of the phase region (uncut cells counted exactly)."""
        c = self.classification
        total = float(np.sum(c.phase == phase)) * c.mesh.h**2
        return total + sum(v[phase - 1].measure for v in self.volume.values())

    def interface_length(self) -> float:
        return sum(r.length for r in self.interface.values())

    def green_area(self) -> float:
        """``1/2 * integral of x . n`` over the interface (equals the phase-1 area)."""
        return sum(0.5 * float(np.sum(r.weights * np.sum(r.points * r.normals, axis=1))) for r in self.interface.values())

    def write_csv(self, path) -> None:
        rows = []
        for e, (r1, r2) in sorted(self.volume.items()):
            for r in (r1, r2):
                for p, w in zip(r.points, r.weights):
                    rows.append((e, r.phase, p[0], p[1], w))
        for e, r in sorted(self.interface.items()):
            for p, w in zip(r.points, r.weights):
                rows.append((e, 0, p[0], p[1], w))
        np.savetxt(path, np.array(rows).reshape(-1, 5), delimiter=",", header="element,phase,x,y,w", comments="",
                   fmt=["%d", "%d", "%.17g", "%.17g", "%.17g"])


def check_sides(spline: SplineInterface, rule: VolumeRule) -> bool:
    """True when every point of ``rule`` lies on its declared side (or on the curve)."""
    if len(rule.weights) == 0:
        return True
    s = spline.side_of(rule.points, tol_on=1e-10)
    return bool(np.all((s == rule.phase) | (s == SideTag.ON_CURVE)))
