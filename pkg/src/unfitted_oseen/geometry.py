"""Marker-based interface tracking with periodic cubic splines.

The interface is stored as a closed chain of markers carrying fixed
parameter values (the arclength parameters of the initial curve).  A
periodic C2 cubic spline through the markers gives the computational
interface; the region it encloses is phase 1, the rest of the box is
phase 2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import GeometryError

_GAUSS5 = np.polynomial.legendre.leggauss(5)


class SideTag(IntEnum):
    """Which side of the interface a point lies on."""

    ON_CURVE = 0
    INSIDE1 = 1
    INSIDE2 = 2


@dataclass(frozen=True)
class MarkerChain:
    """Closed chain of interface markers.

    Attributes:
        points: ``(J, 2)`` marker positions; the chain closes from the last
            marker back to the first one.
        params: ``(J,)`` strictly increasing spline knots, ``params[0] = 0``.
        period: total parameter length ``L``; the closing segment spans
            ``[params[-1], period]``.
        eta: nominal segment size used to create the chain.
    """

    points: NDArray[np.float64]
    params: NDArray[np.float64]
    period: float
    eta: float

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        prm = np.asarray(self.params, dtype=float)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "params", prm)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise GeometryError(f"markers must have shape (J, 2), got {pts.shape}")
        if len(pts) < 8:
            raise GeometryError(f"need at least 8 markers, got {len(pts)}")
        if prm.shape != (len(pts),):
            raise GeometryError("params must have one entry per marker")
        knots = np.append(prm, self.period)
        if np.any(np.diff(knots) <= 0.0):
            raise GeometryError("marker parameters must be strictly increasing")

    @property
    def size(self) -> int:
        return len(self.points)

    def knots(self) -> NDArray[np.float64]:
        return np.append(self.params, self.period)

    def chords(self) -> NDArray[np.float64]:
        """Length of each chord ``p_j -> p_{j+1}`` (closing chord last)."""
        return np.linalg.norm(np.roll(self.points, -1, axis=0) - self.points, axis=1)

    def with_points(self, points: ArrayLike) -> "MarkerChain":
        return MarkerChain(np.asarray(points, dtype=float), self.params, self.period, self.eta)

    def to_json(self) -> str:
        return json.dumps(
            {
                "points": self.points.tolist(),
                "params": self.params.tolist(),
                "period": self.period,
                "eta": self.eta,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "MarkerChain":
        d = json.loads(text)
        return cls(np.array(d["points"]), np.array(d["params"]), float(d["period"]), float(d["eta"]))


def circle_markers(center: ArrayLike, radius: float, eta_target: float, min_markers: int = 8) -> MarkerChain:
    """Markers at equal arclength on a circle, counterclockwise.

    The count is ``J = max(min_markers, ceil(2 pi r / eta_target))`` and the
    actual segment size is ``eta = 2 pi r / J``.
    """
    c = np.asarray(center, dtype=float)
    length = 2.0 * np.pi * radius
    n = max(min_markers, int(np.ceil(length / eta_target - 1e-12)))
    theta = 2.0 * np.pi * np.arange(n) / n
    pts = c + radius * np.column_stack([np.cos(theta), np.sin(theta)])
    eta = length / n
    return MarkerChain(pts, eta * np.arange(n), length, eta)


def curve_markers(curve, period: float, n: int) -> MarkerChain:
    """Sample a closed parametric curve ``curve(l)`` at ``n`` equispaced parameters."""
    eta = period / n
    params = eta * np.arange(n)
    return MarkerChain(np.asarray(curve(params), dtype=float), params, period, eta)


def _segments_intersect(p: NDArray, q: NDArray) -> bool:
    """True if any two non-adjacent chords of the closed polygon ``p`` cross."""
    n = len(p)
    a = p
    b = np.roll(p, -1, axis=0)
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]

    def orient(u, v, w):
        return (v[:, 0] - u[:, 0]) * (w[:, 1] - u[:, 1]) - (v[:, 1] - u[:, 1]) * (w[:, 0] - u[:, 0])

    d1 = orient(a[i], b[i], a[j])
    d2 = orient(a[i], b[i], b[j])
    d3 = orient(a[j], b[j], a[i])
    d4 = orient(a[j], b[j], b[i])
    return bool(np.any((d1 * d2 < 0) & (d3 * d4 < 0)))


def check_chain(markers: MarkerChain) -> None:
    """Raise :class:`GeometryError` if the chain is degenerate or self-intersecting."""
    chords = markers.chords()
    scale = max(np.ptp(markers.points[:, 0]), np.ptp(markers.points[:, 1]), 1e-300)
    if np.any(chords < 1e-14 * scale):
        j = int(np.argmin(chords))
        raise GeometryError(f"coincident adjacent markers at index {j}")
    if _segments_intersect(markers.points, markers.points):
        raise GeometryError("marker polygon is not simple (self-intersection)")


class SplineInterface:
    """Periodic cubic spline through a marker chain.

    ``coeffs[j, m, :]`` multiplies ``(l - knots[j])**m`` on segment ``j``.
    Instances are immutable after construction.
    """

    def __init__(self, markers: MarkerChain):
        self.markers = markers
        self.knots = markers.knots()
        self.period = float(markers.period)
        closed = np.vstack([markers.points, markers.points[:1]])
        self._cs = CubicSpline(self.knots, closed, bc_type="periodic")
        # scipy stores descending powers: c[m] * (x - x_j)**(3 - m)
        self.coeffs = np.ascontiguousarray(self._cs.c[::-1].transpose(1, 0, 2))
        self.seg_len = np.diff(self.knots)
        self.nseg = len(self.seg_len)
        self.signed_area = self._signed_area()
        self.ccw = self.signed_area > 0.0
        self.seg_bbox = self._segment_bboxes()
        lo = self.seg_bbox[:, 0].min(axis=0)
        hi = self.seg_bbox[:, 1].max(axis=0)
        self.bbox = np.array([lo, hi])
        self._ypieces = self._monotone_pieces(1)
        self._xpieces = self._monotone_pieces(0)

    # ---- evaluation -------------------------------------------------------

    def locate(self, l: ArrayLike) -> tuple[NDArray[np.intp], NDArray[np.float64]]:
        """Segment index and local offset for parameters ``l`` (taken modulo the period)."""
        lm = np.mod(np.asarray(l, dtype=float), self.period)
        j = np.searchsorted(self.knots, lm, side="right") - 1
        j = np.clip(j, 0, self.nseg - 1)
        return j, lm - self.knots[j]

    def eval(self, l: ArrayLike, deriv: int = 0) -> NDArray[np.float64]:
        """Point (or derivative of order ``deriv`` <= 3) of the curve at ``l``."""
        if deriv not in (0, 1, 2, 3):
            raise ValueError("deriv must be 0, 1, 2 or 3")
        j, t = self.locate(l)
        c = self.coeffs[j]
        t = t[..., None]
        if deriv == 0:
            return c[..., 0, :] + t * (c[..., 1, :] + t * (c[..., 2, :] + t * c[..., 3, :]))
        if deriv == 1:
            return c[..., 1, :] + t * (2.0 * c[..., 2, :] + 3.0 * t * c[..., 3, :])
        if deriv == 2:
            return 2.0 * c[..., 2, :] + 6.0 * t * c[..., 3, :]
        return 6.0 * c[..., 3, :] + 0.0 * t

    def unit_normal(self, l: ArrayLike) -> NDArray[np.float64]:
        """Unit normal pointing out of the enclosed region (into phase 2)."""
        d = self.eval(l, 1)
        speed = np.linalg.norm(d, axis=-1)
        if np.any(speed < 1e-14):
            raise GeometryError("curve is not regular: |chi'| < 1e-14")
        n = np.stack([d[..., 1], -d[..., 0]], axis=-1) / speed[..., None]
        return n if self.ccw else -n

    def _signed_area(self) -> float:
        x, w = _GAUSS5
        t = 0.5 * (x + 1.0)[None, :] * self.seg_len[:, None]
        wt = 0.5 * w[None, :] * self.seg_len[:, None]
        l = self.knots[:-1, None] + t
        p = self.eval(l)
        d = self.eval(l, 1)
        return float(0.5 * np.sum(wt * (p[..., 0] * d[..., 1] - p[..., 1] * d[..., 0])))

    def area(self) -> float:
        """Enclosed area (Green's theorem, exact for the cubic pieces)."""
        return abs(self.signed_area)

    def length(self, nsub: int = 4) -> float:
        x, w = _GAUSS5
        edges = self.knots[:-1, None] + self.seg_len[:, None] * np.linspace(0, 1, nsub + 1)[None, :]
        a, b = edges[:, :-1], edges[:, 1:]
        l = 0.5 * (a + b)[..., None] + 0.5 * (b - a)[..., None] * x
        speed = np.linalg.norm(self.eval(l, 1), axis=-1)
        return float(np.sum(0.5 * (b - a)[..., None] * w * speed))

    def sample(self, n: int) -> tuple[NDArray, NDArray]:
        l = np.linspace(0.0, self.period, n, endpoint=False)
        return l, self.eval(l)

    # ---- per-segment helpers -------------------------------------------------

    def _critical_points(self, poly: NDArray, d: float) -> list[float]:
        """Interior zeros of the derivative of the cubic ``poly`` on ``(0, d)``."""
        a, b, c = 3.0 * poly[3], 2.0 * poly[2], poly[1]
        out: list[float] = []
        scale = abs(a) * d * d + abs(b) * d + abs(c)
        if scale == 0.0:
            return out
        if abs(a) * d * d < 1e-14 * scale:
            if abs(b) > 0.0:
                out = [-c / b]
        else:
            disc = b * b - 4.0 * a * c
            if disc > 0.0:
                s = np.sqrt(disc)
                q = -0.5 * (b + np.copysign(s, b))
                out = [q / a, c / q] if q != 0.0 else [0.0]
            elif disc == 0.0:
                out = [-b / (2.0 * a)]
        return sorted(t for t in out if 0.0 < t < d)

    def _segment_bboxes(self) -> NDArray[np.float64]:
        boxes = np.empty((self.nseg, 2, 2))
        for j in range(self.nseg):
            d = self.seg_len[j]
            for dim in range(2):
                poly = self.coeffs[j, :, dim]
                ts = [0.0, d] + self._critical_points(poly, d)
                vals = [np.polyval(poly[::-1], t) for t in ts]
                boxes[j, 0, dim] = min(vals)
                boxes[j, 1, dim] = max(vals)
        return boxes

    def _monotone_pieces(self, dim: int) -> dict[str, NDArray]:
        """Split the curve into pieces monotone in coordinate ``dim``.

        Piece end values at knots are taken from the markers so that adjacent
        segments agree bit-for-bit.
        """
        seg, t0, t1, v0, v1, olo, ohi = [], [], [], [], [], [], []
        other = 1 - dim
        pts = self.markers.points
        for j in range(self.nseg):
            d = self.seg_len[j]
            poly = self.coeffs[j, :, dim]
            opoly = self.coeffs[j, :, other]
            cuts = [0.0] + self._critical_points(poly, d) + [d]
            for a, b in zip(cuts[:-1], cuts[1:]):
                va = pts[j, dim] if a == 0.0 else np.polyval(poly[::-1], a)
                vb = pts[(j + 1) % self.nseg, dim] if b == d else np.polyval(poly[::-1], b)
                ots = [a, b] + [t for t in self._critical_points(opoly, d) if a < t < b]
                ov = [np.polyval(opoly[::-1], t) for t in ots]
                seg.append(j)
                t0.append(a)
                t1.append(b)
                v0.append(va)
                v1.append(vb)
                olo.append(min(ov))
                ohi.append(max(ov))
        return {
            "seg": np.array(seg),
            "t0": np.array(t0),
            "t1": np.array(t1),
            "v0": np.array(v0),
            "v1": np.array(v1),
            "olo": np.array(olo),
            "ohi": np.array(ohi),
        }

    # ---- point location -----------------------------------------------------

    def _ray_crossings(self, pts: NDArray, dim: int, tol: float) -> tuple[NDArray, NDArray]:
        """Crossings of the ray from each point in the +``other`` direction.

        The ray is the line ``coord[dim] = pts[:, dim]`` travelling towards
        increasing ``coord[1 - dim]``.  Returns (crossing parity, on-curve flag).
        """
        pieces = self._ypieces if dim == 1 else self._xpieces
        other = 1 - dim
        n = len(pts)
        parity = np.zeros(n, dtype=bool)
        oncurve = np.zeros(n, dtype=bool)
        pv = pts[:, dim]
        po = pts[:, other]
        for k in range(len(pieces["seg"])):
            v0, v1 = pieces["v0"][k], pieces["v1"][k]
            # half-open rule: a zero difference counts as positive
            hit = (v0 - pv >= 0.0) != (v1 - pv >= 0.0)
            if not np.any(hit):
                continue
            idx = np.nonzero(hit)[0]
            olo, ohi = pieces["olo"][k], pieces["ohi"][k]
            left = po[idx] < olo - tol
            right = po[idx] > ohi + tol
            parity[idx[left]] ^= True
            amb = idx[~left & ~right]
            if len(amb) == 0:
                continue
            j = pieces["seg"][k]
            poly = self.coeffs[j, :, dim]
            opoly = self.coeffs[j, :, other]
            lo = np.full(len(amb), pieces["t0"][k])
            hi = np.full(len(amb), pieces["t1"][k])
            target = pv[amb]
            flo = (v0 - target) >= 0.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                fm = (poly[0] + mid * (poly[1] + mid * (poly[2] + mid * poly[3])) - target) >= 0.0
                same = fm == flo
                lo = np.where(same, mid, lo)
                hi = np.where(same, hi, mid)
            t = 0.5 * (lo + hi)
            xo = opoly[0] + t * (opoly[1] + t * (opoly[2] + t * opoly[3]))
            parity[amb[xo > po[amb]]] ^= True
            oncurve[amb[np.abs(xo - po[amb]) <= tol]] = True
        return parity, oncurve

    def side_of(self, x: ArrayLike, tol_on: float | None = None) -> NDArray[np.int8] | SideTag:
        """Classify points as inside phase 1, inside phase 2, or on the curve.

        Uses exact ray crossings of the cubic pieces (even-odd rule), which
        for a simple closed curve equals the winding-number test.
        """
        pts = np.asarray(x, dtype=float)
        scalar = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if tol_on is None:
            tol_on = 1e-12 * max(1.0, float(np.max(np.abs(self.bbox))))
        parity, on_h = self._ray_crossings(pts, 1, tol_on)
        _, on_v = self._ray_crossings(pts, 0, tol_on)
        out = np.where(parity, SideTag.INSIDE1, SideTag.INSIDE2).astype(np.int8)
        out[on_h | on_v] = SideTag.ON_CURVE
        if scalar:
            return SideTag(int(out[0]))
        return out

    # ---- intersections ------------------------------------------------------

    def _roots_on_segment(self, j: int, poly: NDArray, fa: float, fb: float) -> list[float]:
        """Sign-change roots of the cubic ``poly`` on segment ``j``.

        ``fa`` and ``fb`` are the end values to use (taken from markers so that
        neighbouring segments agree); zero counts as positive, which is the
        symbolic form of shifting the line by an infinitesimal amount.
        """
        d = self.seg_len[j]
        cuts = [0.0] + self._critical_points(poly, d) + [d]
        vals = [fa] + [np.polyval(poly[::-1], t) for t in cuts[1:-1]] + [fb]
        roots = []

        def f(t):
            return poly[0] + t * (poly[1] + t * (poly[2] + t * poly[3]))

        for a, b, va, vb in zip(cuts[:-1], cuts[1:], vals[:-1], vals[1:]):
            if (va >= 0.0) == (vb >= 0.0):
                continue
            if va == 0.0:
                roots.append(a)
            elif vb == 0.0:
                roots.append(b)
            else:
                fa_, fb_ = f(a), f(b)
                if (fa_ >= 0.0) == (fb_ >= 0.0):
                    # rounding moved the sign; pick the endpoint closest to zero
                    roots.append(a if abs(fa_) < abs(fb_) else b)
                else:
                    roots.append(brentq(f, a, b, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200))
        return roots

    def line_intersections(self, a: ArrayLike, b: ArrayLike) -> list[tuple[float, NDArray, float]]:
        """All crossings of the segment ``[a, b)`` with the curve.

        Returns ``(l, point, s)`` tuples sorted by ``l`` where ``s`` in
        ``[0, 1)`` is the relative position along the segment.
        """
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        e = b - a
        elen = float(np.hypot(*e))
        if elen == 0.0:
            return []
        nrm = np.array([-e[1], e[0]]) / elen
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        pad = 1e-12 * max(1.0, elen)
        box = self.seg_bbox
        cand = np.nonzero(
            np.all(box[:, 0] <= hi + pad, axis=1) & np.all(box[:, 1] >= lo - pad, axis=1)
        )[0]
        pts = self.markers.points
        out = []
        for j in cand:
            poly = self.coeffs[j] @ nrm
            poly = poly.copy()
            poly[0] -= nrm @ a
            fa = (pts[j] - a) @ nrm
            fb = (pts[(j + 1) % self.nseg] - a) @ nrm
            for t in self._roots_on_segment(j, poly, fa, fb):
                if t >= self.seg_len[j]:
                    l = self.knots[j + 1] % self.period
                    p = pts[(j + 1) % self.nseg].copy()
                else:
                    l = self.knots[j] + t
                    p = self.coeffs[j, 0] + t * (self.coeffs[j, 1] + t * (self.coeffs[j, 2] + t * self.coeffs[j, 3]))
                s = float((p - a) @ e) / elen**2
                if 0.0 <= s < 1.0:
                    out.append((float(l), p, s))
        out.sort(key=lambda r: r[0])
        return out

    def edge_intersections(self, a: ArrayLike, b: ArrayLike) -> list[tuple[float, NDArray]]:
        """Transversal crossings of the edge ``[a, b]`` sorted by curve parameter."""
        return [(l, p) for l, p, _ in self.line_intersections(a, b)]

    # ---- export -------------------------------------------------------------

    def to_csv(self, path, n: int = 400) -> None:
        l, p = self.sample(n)
        l = np.append(l, self.period)
        p = np.vstack([p, p[:1]])
        np.savetxt(path, np.column_stack([l, p]), delimiter=",", header="l,x,y", comments="")

    def svg_path(self, n: int = 400, scale: float = 400.0, height: float = 1.0) -> str:
        _, p = self.sample(n)
        pts = " L ".join(f"{scale * x:.4f},{scale * (height - y):.4f}" for x, y in p)
        return f"M {pts} Z"


def fit_periodic_spline(markers: MarkerChain, check: bool = True) -> SplineInterface:
    """Periodic C2 cubic spline through the markers at their fixed parameters."""
    if check:
        check_chain(markers)
    return SplineInterface(markers)


def write_svg(path, splines: list[SplineInterface], size: float = 400.0, labels=None) -> None:
    """Write one or more interfaces as an SVG 1.1 file over the unit box."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size:.0f}" height="{size:.0f}" '
        f'viewBox="0 0 {size:.0f} {size:.0f}">',
        f'<rect x="0" y="0" width="{size:.0f}" height="{size:.0f}" fill="none" stroke="black"/>',
    ]
    for i, s in enumerate(splines):
        title = f"<title>{labels[i]}</title>" if labels else ""
        parts.append(
            f'<path d="{s.svg_path(scale=size)}" fill="none" stroke="{colors[i % len(colors)]}" '
            f'stroke-width="1.5">{title}</path>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def redistribute_markers(markers: MarkerChain, target_eta: float | None = None) -> MarkerChain:
    """One pass of chord-length marker insertion and removal.

    A marker is inserted (by spline evaluation at the parameter midpoint) on
    every chord longer than ``2 * target_eta``.  Where two consecutive chords
    are both shorter than ``0.5 * target_eta`` the shared marker is removed,
    never removing two neighbours in the same pass.
    """
    eta = markers.eta if target_eta is None else float(target_eta)
    spline = SplineInterface(markers)
    pts, prm = markers.points, markers.params
    knots = markers.knots()
    chords = markers.chords()
    n = len(pts)

    remove = np.zeros(n, dtype=bool)
    short = chords < 0.5 * eta
    # marker 0 carries the parameter origin and is never removed
    j = 1
    while j < n:
        if short[j - 1] and short[j] and not remove[j - 1]:
            remove[j] = True
            j += 2
        else:
            j += 1

    new_pts, new_prm = [], []
    for j in range(n):
        if not remove[j]:
            new_pts.append(pts[j])
            new_prm.append(prm[j])
        if chords[j] > 2.0 * eta:
            lm = 0.5 * (knots[j] + knots[j + 1])
            new_pts.append(spline.eval(lm))
            new_prm.append(lm)
    if len(new_pts) < 8:
        raise GeometryError("redistribution would leave fewer than 8 markers")
    order = np.argsort(new_prm)
    out = MarkerChain(np.array(new_pts)[order], np.array(new_prm)[order], markers.period, markers.eta)
    if len(out.points) != n:
        check_chain(out)
    return out
