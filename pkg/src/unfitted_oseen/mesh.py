"""Uniform square background mesh and its classification against the interface.

Elements are indexed ``e = j * nc + i`` where ``i`` counts cells in ``x`` and
``j`` in ``y``.  The classification walks along the spline: all crossings
with the interior grid lines are located and sorted by curve parameter, so
the curve splits into arcs that each lie inside a single cell.  Cells with at
least one arc of positive length are cut.  Because every crossing is computed
once per grid line, neighbouring cells always agree on where the curve enters
and leaves them.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import MeshError
from .geometry import SideTag, SplineInterface

logger = logging.getLogger(__name__)

VERTICAL = 0  # edge x = const, normal +x, first element on the left
HORIZONTAL = 1  # edge y = const, normal +y, first element below


@dataclass(frozen=True)
class StructuredMesh:
    """``nc x nc`` square cells covering ``[x0, x0 + side] x [y0, y0 + side]``."""

    nc: int
    origin: tuple[float, float] = (0.0, 0.0)
    side: float = 1.0

    def __post_init__(self) -> None:
        if self.nc < 1:
            raise MeshError("nc must be positive")

    @property
    def h(self) -> float:
        return self.side / self.nc

    @property
    def n_elements(self) -> int:
        return self.nc * self.nc

    def element_ij(self, e) -> tuple[NDArray, NDArray]:
        e = np.asarray(e)
        return e % self.nc, e // self.nc

    def element_index(self, i, j):
        return np.asarray(j) * self.nc + np.asarray(i)

    def element_origin(self, e) -> NDArray[np.float64]:
        i, j = self.element_ij(e)
        return np.stack([self.origin[0] + i * self.h, self.origin[1] + j * self.h], axis=-1)

    def element_center(self, e) -> NDArray[np.float64]:
        return self.element_origin(e) + 0.5 * self.h

    def grid_lines(self, axis: int) -> NDArray[np.float64]:
        return self.origin[axis] + self.h * np.arange(self.nc + 1)

    def locate(self, pts) -> NDArray[np.intp]:
        """Element containing each point; points on grid lines go left/up."""
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        # x = x_i belongs to cell i-1 and y = y_j to cell j, matching the
        # crossing rule of the spline intersections
        i = np.ceil((p[:, 0] - self.origin[0]) / self.h).astype(np.intp) - 1
        j = np.floor((p[:, 1] - self.origin[1]) / self.h).astype(np.intp)
        i = np.clip(i, 0, self.nc - 1)
        j = np.clip(j, 0, self.nc - 1)
        return j * self.nc + i

    def interior_edges(self) -> NDArray[np.intp]:
        """All interior edges as rows ``(e_first, e_second, orientation)``."""
        nc = self.nc
        ii, jj = np.meshgrid(np.arange(1, nc), np.arange(nc), indexing="xy")
        v = np.stack([(jj * nc + ii - 1).ravel(), (jj * nc + ii).ravel(), np.full(ii.size, VERTICAL)], axis=1)
        ii, jj = np.meshgrid(np.arange(nc), np.arange(1, nc), indexing="xy")
        hz = np.stack([((jj - 1) * nc + ii).ravel(), (jj * nc + ii).ravel(), np.full(ii.size, HORIZONTAL)], axis=1)
        return np.vstack([v, hz]).astype(np.intp)


@dataclass(frozen=True)
class Arc:
    """Piece of the interface inside one cell, traversed in curve direction."""

    element: int
    l0: float
    l1: float  # may exceed the period when the arc wraps around l = 0
    p0: NDArray[np.float64]
    p1: NDArray[np.float64]


@dataclass
class Classification:
    """Element and edge sets of one time level.

    Attributes:
        cut: elements whose intersection with the curve has positive length.
        phase: 1 or 2 for uncut elements, 0 for cut ones.
        in_cover: ``in_cover[i - 1, e]`` is true when element ``e`` belongs to
            the cover of phase ``i``.
        arcs: interface arcs of every cut element.
        ghost: per phase, rows ``(e_first, e_second, orientation)``.
    """

    mesh: StructuredMesh
    spline: SplineInterface | None
    cut: NDArray[np.bool_]
    phase: NDArray[np.int8]
    in_cover: NDArray[np.bool_]
    arcs: dict[int, list[Arc]] = field(default_factory=dict)
    ghost: tuple[NDArray[np.intp], NDArray[np.intp]] = field(default=None)  # type: ignore[assignment]

    def cover(self, i: int) -> NDArray[np.intp]:
        return np.nonzero(self.in_cover[i - 1])[0]

    def cut_elements(self) -> NDArray[np.intp]:
        return np.nonzero(self.cut)[0]

    def interior(self, i: int) -> NDArray[np.intp]:
        """Uncut elements of phase ``i`` (the elements of the inner domain)."""
        return np.nonzero(self.phase == i)[0]

    def ghost_edges(self, i: int) -> NDArray[np.intp]:
        return self.ghost[i - 1]

    def raster(self) -> NDArray[np.uint8]:
        """Per-element class image (row 0 at the top): 0 phase 2, 128 cut, 255 phase 1."""
        img = np.where(self.cut, 128, np.where(self.phase == 1, 255, 0)).astype(np.uint8)
        return img.reshape(self.mesh.nc, self.mesh.nc)[::-1]

    def write_pgm(self, path) -> None:
        img = self.raster()
        with open(path, "wb") as fh:
            fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
            fh.write(img.tobytes())

    def write_csv(self, path) -> None:
        e = np.arange(self.mesh.n_elements)
        i, j = self.mesh.element_ij(e)
        data = np.column_stack([e, i, j, self.cut.astype(int), self.phase, self.in_cover[0], self.in_cover[1]])
        np.savetxt(path, data, fmt="%d", delimiter=",", header="element,i,j,cut,phase,cover1,cover2", comments="")


def _grid_crossings(mesh: StructuredMesh, spline: SplineInterface) -> list[tuple[float, NDArray]]:
    out = []
    lo, hi = spline.bbox
    pad = 1.0 + mesh.side
    for axis in (0, 1):
        lines = mesh.grid_lines(axis)[1:-1]
        lines = lines[(lines >= lo[axis] - mesh.h) & (lines <= hi[axis] + mesh.h)]
        for c in lines:
            if axis == 0:
                a = np.array([c, mesh.origin[1] - pad])
                b = np.array([c, mesh.origin[1] + mesh.side + pad])
            else:
                a = np.array([mesh.origin[0] - pad, c])
                b = np.array([mesh.origin[0] + mesh.side + pad, c])
            for l, p, _ in spline.line_intersections(a, b):
                p = p.copy()
                p[axis] = c
                out.append((l, p))
    out.sort(key=lambda r: r[0])
    return out


def _on_cell_boundary(mesh: StructuredMesh, e: int, p: NDArray, tol: float) -> bool:
    o = mesh.element_origin(e)
    q = (p - o) / mesh.h
    inside = np.all(q >= -tol) and np.all(q <= 1 + tol)
    edge = np.min(np.abs(np.concatenate([q, 1 - q]))) <= tol
    return bool(inside and edge)


def _curve_arcs(mesh: StructuredMesh, spline: SplineInterface) -> dict[int, list[Arc]]:
    cr = _grid_crossings(mesh, spline)
    if not cr:
        raise MeshError("the interface lies inside a single element; refine the mesh")
    period = spline.period
    arcs: dict[int, list[Arc]] = {}
    tiny = 1e-13 * period
    for m in range(len(cr)):
        l0, p0 = cr[m]
        l1, p1 = cr[(m + 1) % len(cr)]
        if m == len(cr) - 1:
            l1 = l1 + period
        if l1 - l0 <= tiny:
            continue
        mid = spline.eval(0.5 * (l0 + l1))
        e = int(mesh.locate(mid)[0])
        for p in (p0, p1):
            if not _on_cell_boundary(mesh, e, p, 1e-9):
                raise MeshError(f"arc [{l0}, {l1}] does not end on the boundary of element {e}")
        arcs.setdefault(e, []).append(Arc(e, float(l0), float(l1), p0, p1))
    return arcs


def classify(mesh: StructuredMesh, spline: SplineInterface | None) -> Classification:
    """Cut elements, covers and ghost edges for one interface position."""
    ne = mesh.n_elements
    if spline is None:
        cut = np.zeros(ne, dtype=bool)
        phase = np.full(ne, 2, dtype=np.int8)
        in_cover = np.vstack([np.zeros(ne, dtype=bool), np.ones(ne, dtype=bool)])
        c = Classification(mesh, None, cut, phase, in_cover, {})
        c.ghost = (_ghost(mesh, c, 1), _ghost(mesh, c, 2))
        return c
    lo, hi = spline.bbox
    dlo = np.asarray(mesh.origin)
    dhi = dlo + mesh.side
    if np.any(lo <= dlo) or np.any(hi >= dhi):
        raise MeshError("the interface touches or leaves the domain boundary")
    if np.any(lo < dlo + 2 * mesh.h) or np.any(hi > dhi - 2 * mesh.h):
        logger.info("interface is closer than 2h to the domain boundary")
    arcs = _curve_arcs(mesh, spline)
    cut = np.zeros(ne, dtype=bool)
    cut[list(arcs)] = True
    centers = mesh.element_center(np.arange(ne))
    side = spline.side_of(centers)
    phase = np.where(side == SideTag.INSIDE1, 1, 2).astype(np.int8)
    unc = ~cut
    if np.any(side[unc] == SideTag.ON_CURVE):
        raise MeshError("an uncut element has its centre on the interface")
    phase[cut] = 0
    in_cover = np.vstack([cut | (phase == 1), cut | (phase == 2)])
    c = Classification(mesh, spline, cut, phase, in_cover, arcs)
    c.ghost = (_ghost(mesh, c, 1), _ghost(mesh, c, 2))
    return c


def _ghost(mesh: StructuredMesh, c: Classification, i: int) -> NDArray[np.intp]:
    edges = mesh.interior_edges()
    a, b = edges[:, 0], edges[:, 1]
    cov = c.in_cover[i - 1]
    keep = cov[a] & cov[b] & (c.cut[a] | c.cut[b])
    return edges[keep]


def ghost_edges(c: Classification, phase: int) -> NDArray[np.intp]:
    """Interior edges of cut elements lying inside the cover of ``phase``."""
    return c.ghost_edges(phase)


@dataclass(frozen=True)
class MeshReport:
    max_chain_len: int
    boundary_edge_violations: int
    chain_len_per_phase: tuple[int, int]


def _neighbours(nc: int, e: int):
    i, j = e % nc, e // nc
    if i > 0:
        yield e - 1
    if i < nc - 1:
        yield e + 1
    if j > 0:
        yield e - nc
    if j < nc - 1:
        yield e + nc


def check_mesh_assumptions(c: Classification) -> MeshReport:
    """Chain length from cut elements to interior ones and boundary-edge counts.

    The chain length is the number of elements in the shortest sequence that
    starts at a cut element, steps across ghost edges of one phase, and ends
    at an uncut element of that phase.  Violations count uncut elements with
    three or more edges on the boundary of their phase's inner domain.  Both
    are reported, not repaired; a cut element without any such chain is an
    error because the ghost penalty cannot reach it.
    """
    mesh = c.mesh
    nc = mesh.nc
    chains = []
    violations = 0
    for i in (1, 2):
        interior = c.phase == i
        adj: dict[int, list[int]] = {}
        for a, b, _ in c.ghost_edges(i):
            adj.setdefault(int(a), []).append(int(b))
            adj.setdefault(int(b), []).append(int(a))
        # multi-source BFS from the interior elements
        dist = np.full(mesh.n_elements, -1)
        q = deque()
        for e in np.nonzero(interior)[0]:
            if e in adj:
                dist[e] = 0
                q.append(int(e))
        while q:
            e = q.popleft()
            for f in adj.get(e, []):
                if dist[f] < 0 and c.cut[f]:
                    dist[f] = dist[e] + 1
                    q.append(f)
        cuts = c.cut_elements()
        if len(cuts) and np.any(dist[cuts] < 0):
            bad = cuts[dist[cuts] < 0]
            raise MeshError(f"cut elements {bad.tolist()} cannot reach an interior element of phase {i}")
        chains.append(int(dist[cuts].max()) + 1 if len(cuts) else 1)
        for e in np.nonzero(interior)[0]:
            nb = list(_neighbours(nc, int(e)))
            on_bdr = (4 - len(nb)) + sum(1 for f in nb if not interior[f])
            if on_bdr > 2:
                violations += 1
    rep = MeshReport(max(chains), violations, (chains[0], chains[1]))
    if violations:
        logger.warning("%d elements have more than two edges on the inner-domain boundary", violations)
    return rep
