"""Stokes projection, single time steps and the time-marching driver."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.typing import NDArray

from .assembly import Assembler, BDFScheme, PenaltyParams, SaddleSystem
from .cases import Case, make_case
from .errors import UnfittedError
from .fespace import DofMap, FieldPair, NodeGrid, eval_local, interpolate
from .flowmap import FlowMapStack, OneStepMap, tableau_for
from .geometry import (
    MarkerChain,
    SplineInterface,
    check_chain,
    curve_markers,
    fit_periodic_spline,
    redistribute_markers,
)
from .mesh import StructuredMesh, classify

logger = logging.getLogger(__name__)

RESULT_SCHEMA = "unfitted-oseen/run-result/1"


def config_hash(config: dict) -> str:
    """Short provenance hash of a configuration dictionary."""
    text = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass
class RunConfig:
    """Parameters of one run.

    ``tau`` defaults to ``h``; the marker spacing follows
    ``eta = eta_factor * tau ** max(1, k / 3)`` unless ``n_markers`` is given.
    """

    k: int = 3
    nc: int = 16
    T: float = 1.5
    tau: float | None = None
    gamma0: float = 1.0e3
    gamma1: float = 1.0
    nu: tuple[float, float] = (1.0, 1.0e-3)
    case: str = "manufactured"
    eta_factor: float = 0.5
    n_markers: int | None = None
    quad_order: int | None = None
    n_if: int | None = None
    redistribute: bool = True
    g0_penalty: bool = True
    seed: int = 0
    snapshot_times: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.k not in (2, 3, 4):
            raise ValueError("k must be 2, 3 or 4")
        if self.nc < 2:
            raise ValueError("nc must be at least 2")
        self.nu = tuple(float(v) for v in self.nu)  # type: ignore[assignment]
        self.snapshot_times = tuple(float(v) for v in self.snapshot_times)
        ratio = self.h / self.step
        if not 0.1 <= ratio <= 10.0:
            raise ValueError(f"h / tau = {ratio:.3g} outside [0.1, 10]")
        if self.step > self.nu[1]:
            logger.info("tau = %.3g exceeds nu2 = %.3g", self.step, self.nu[1])

    @property
    def h(self) -> float:
        return 1.0 / self.nc

    @property
    def step(self) -> float:
        return self.tau if self.tau is not None else self.h

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.step))

    @property
    def eta(self) -> float:
        return self.eta_factor * self.step ** max(1.0, self.k / 3.0)

    @property
    def params(self) -> PenaltyParams:
        return PenaltyParams(self.gamma0, self.gamma1, self.nu)


@dataclass
class Geometry:
    """Interface position and everything built on it at one time level."""

    step: int
    t: float
    markers: MarkerChain
    spline: SplineInterface
    asm: Assembler

    @property
    def classification(self):
        return self.asm.c

    @classmethod
    def build(cls, step: int, t: float, markers: MarkerChain, mesh: StructuredMesh, k: int,
              params: PenaltyParams, n_cut=None, n_if=None) -> "Geometry":
        spline = fit_periodic_spline(markers)
        c = classify(mesh, spline)
        asm = Assembler(c, k, params, n_cut=n_cut, n_if=n_if)
        return cls(step, t, markers, spline, asm)


def initial_markers(case: Case, eta: float, n_markers: int | None = None) -> MarkerChain:
    n = n_markers if n_markers is not None else max(16, int(math.ceil(case.perimeter / eta)))
    return curve_markers(case.curve, case.perimeter, n)


# ---- field evaluation on quadrature batches ---------------------------------


def batch_values(asm: Assembler, i: int, x: NDArray) -> list[dict[str, NDArray]]:
    """Discrete phase-``i`` fields of system vector ``x`` at every batch point."""
    out = []
    for b in asm.batches[i]:
        el = b.elements
        cu = np.stack([x[asm.vdofs(i, el, 0)], x[asm.vdofs(i, el, 1)]], axis=-1)  # (E, nb, 2)
        cp = x[asm.pdofs(i, el)]  # (E, nbp)
        u = b.phi @ cu
        gu = np.stack([b.phi_x @ cu, b.phi_y @ cu], axis=-1)  # (E, nq, 2comp, 2deriv)
        p = np.einsum("eqa,ea->eq", np.broadcast_to(b.psi, b.points.shape[:2] + b.psi.shape[2:]), cp)
        gp = np.stack([
            np.einsum("eqa,ea->eq", np.broadcast_to(b.psi_x, b.points.shape[:2] + b.psi.shape[2:]), cp),
            np.einsum("eqa,ea->eq", np.broadcast_to(b.psi_y, b.points.shape[:2] + b.psi.shape[2:]), cp),
        ], axis=-1)
        out.append({"u": u, "gu": gu, "p": p, "gp": gp})
    return out


def phase_integral(asm: Assembler, i: int, fn) -> float:
    """Integral over phase ``i`` of ``fn(points, batch_index)`` (returns (E, nq))."""
    total = 0.0
    for bi, b in enumerate(asm.batches[i]):
        vals = np.asarray(fn(b.points, bi))
        total += float(np.sum(np.broadcast_to(b.weights, vals.shape) * vals))
    return total


def pressure_shift(asm: Assembler, pressure, t: float) -> float:
    """Constant ``c`` with ``sum_i nu_i^-1 (p_i - c, 1) = 0``."""
    nu = asm.params.nu
    num = sum(phase_integral(asm, i, lambda P, bi, i=i: pressure(i, P, t)) / nu[i - 1] for i in (1, 2))
    den = sum(phase_integral(asm, i, lambda P, bi: np.ones(P.shape[:2])) / nu[i - 1] for i in (1, 2))
    return num / den


def error_terms(asm: Assembler, x: NDArray, case: Case, t: float) -> dict[str, float]:
    """Squared error contributions at one time level (pressure mean-aligned)."""
    nu = asm.params.nu
    shift = pressure_shift(asm, case.pressure, t)
    out = {"u0": 0.0, "u1": 0.0, "p0": 0.0, "p1": 0.0}
    for i in (1, 2):
        vals = batch_values(asm, i, x)
        for b, v in zip(asm.batches[i], vals):
            P = b.points
            w = np.broadcast_to(b.weights, P.shape[:2])
            eu = case.velocity(i, P, t) - v["u"]
            egu = case.velocity_grad(i, P, t) - v["gu"]
            ep = case.pressure(i, P, t) - shift - v["p"]
            egp = case.pressure_grad(i, P, t) - v["gp"]
            out["u0"] += float(np.sum(w * np.sum(eu**2, axis=-1)))
            out["u1"] += nu[i - 1] * float(np.sum(w * np.sum(egu**2, axis=(-1, -2))))
            out["p0"] += float(np.sum(w * ep**2)) / nu[i - 1]
            out["p1"] += float(np.sum(w * np.sum(egp**2, axis=-1))) / nu[i - 1]
    return out


def dirichlet_values(asm: Assembler, case: Case, t: float) -> tuple[NDArray, NDArray]:
    dm = asm.dofs
    grid = NodeGrid(asm.mesh, asm.k)
    b = grid.boundary_nodes()
    loc = dm.vel[1][b]
    keep = loc >= 0
    b, loc = b[keep], loc[keep]
    vals = case.velocity(2, grid.coords()[b], t)
    off = dm.vel_offsets[1]
    idx = np.concatenate([off + loc, off + dm.n_u[1] + loc])
    return idx, np.concatenate([vals[:, 0], vals[:, 1]])


def mean_constraint_value(asm: Assembler, x: NDArray) -> float:
    return float(asm.constraint @ x)


# ---- Stokes projection -----------------------------------------------------------


def stokes_projection(asm: Assembler, velocity, velocity_grad, pressure, t: float = 0.0,
                      f_mode: str = "B0u", dirichlet=None) -> tuple[FieldPair, FieldPair, NDArray, float]:
    """Modified Stokes projection of exact phase functions.

    Solves ``A_h(u_h, v) + B0(v, p_h) = a_h(u, v) + B0(v, p)`` and
    ``-B0(u_h, q) + J_p(p_h, q) = -f(q)`` with ``f(q) = B0(u, q)`` (``f_mode="B0u"``)
    or ``0`` (``"zero"``), plus the pressure mean constraint.  ``a_h`` is
    ``A_h`` without the velocity ghost penalty.  ``velocity(i, x, t)``,
    ``velocity_grad(i, x, t)`` and ``pressure(i, x, t)`` are the exact
    fields.  Phase-2 boundary values are the nodal interpolant of the exact
    velocity unless ``dirichlet=(indices, values)`` is given.
    """
    p = asm.params
    k1, k2 = p.kappa
    nh = p.nu_h
    pen = p.gamma0 * p.nu_avg / asm.h
    rhs = np.zeros(asm.N)
    for i in (1, 2):
        nui = p.nu[i - 1]
        rhs += asm.velocity_load(i, lambda P, i=i: nui * velocity_grad(i, P, t)[..., :, 0], "dx")
        rhs += asm.velocity_load(i, lambda P, i=i: nui * velocity_grad(i, P, t)[..., :, 1], "dy")
        # -(div v, p)
        rhs += asm.velocity_load(i, lambda P, i=i: np.stack([-pressure(i, P, t), np.zeros(len(P))], axis=-1), "dx")
        rhs += asm.velocity_load(i, lambda P, i=i: np.stack([np.zeros(len(P)), -pressure(i, P, t)], axis=-1), "dy")
        if f_mode == "B0u":
            # q-row: -f(q) = (div u, q) - ([u] . n, <q>)
            rhs += asm.pressure_load(i, lambda P, i=i: np.trace(velocity_grad(i, P, t), axis1=-2, axis2=-1), "psi")

    def jump_u(X, n):
        return velocity(1, X, t) - velocity(2, X, t)

    def avg_flux(X, n):
        d1 = np.einsum("qcd,qd->qc", velocity_grad(1, X, t), n)
        d2 = np.einsum("qcd,qd->qc", velocity_grad(2, X, t), n)
        return nh * (d1 + d2)

    def jump_rhs(X, n):
        pavg = k1 * pressure(1, X, t) + k2 * pressure(2, X, t)
        return -avg_flux(X, n) + pen * jump_u(X, n) + pavg[:, None] * n

    rhs += asm.interface_velocity_load(jump=jump_rhs, flux=lambda X, n: -jump_u(X, n))
    if f_mode == "B0u":
        rhs += asm.interface_pressure_avg_load(lambda X, n: -np.sum(jump_u(X, n) * n, axis=1))
    elif f_mode != "zero":
        raise ValueError("f_mode must be 'B0u' or 'zero'")
    if dirichlet is None:
        grid = NodeGrid(asm.mesh, asm.k)
        b = grid.boundary_nodes()
        loc = asm.dofs.vel[1][b]
        b, loc = b[loc >= 0], loc[loc >= 0]
        vals = velocity(2, grid.coords()[b], t)
        off = asm.dofs.vel_offsets[1]
        dirichlet = (np.concatenate([off + loc, off + asm.dofs.n_u[1] + loc]), np.concatenate([vals[:, 0], vals[:, 1]]))
    system = SaddleSystem(asm.K0(), rhs, dirichlet[0], dirichlet[1])
    x, res = system.solve()
    u, ph = asm.dofs.split(x)
    return u, ph, x, res


# ---- time stepping -----------------------------------------------------------------


@dataclass
class StepDiagnostics:
    step: int
    time: float
    u_norm: float
    residual: float
    cut_cells: int
    min_cut_area: float
    area: float
    length: float
    mean_constraint: float
    seconds: float


@dataclass
class RunResult:
    config: dict
    errors: dict[str, float]
    diagnostics: list[StepDiagnostics]
    status: str = "ok"
    failure: str | None = None
    snapshots: dict[str, list[list[float]]] = field(default_factory=dict)
    steps_solved: int = 0
    interfaces: dict[str, SplineInterface] = field(default_factory=dict, repr=False)

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def to_dict(self) -> dict:
        return {
            "schema": RESULT_SCHEMA,
            "config_hash": self.config_hash,
            "config": self.config,
            "errors": self.errors,
            "status": self.status,
            "failure": self.failure,
            "steps_solved": self.steps_solved,
            "diagnostics": [asdict(d) for d in self.diagnostics],
            "snapshots": self.snapshots,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def write_diagnostics_csv(self, path) -> None:
        cols = ["step", "time", "u_norm", "residual", "cut_cells", "min_cut_area", "area", "length", "mean_constraint", "seconds"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for d in self.diagnostics:
                fh.write(",".join(repr(getattr(d, c)) for c in cols) + "\n")


@dataclass
class History:
    """Solved (or initial) velocity of one past step with its own geometry."""

    step: int
    velocity: FieldPair


def history_values(asm: Assembler, history: list[History], stack: FlowMapStack, n: int,
                   lam: NDArray, tau: float) -> dict[int, list[NDArray]]:
    """``-tau^-1 sum_{j>=1} lambda_j U_i^{n-j,n}`` at every batch point of both phases."""
    k = len(lam) - 1
    pts_all, index = [], []
    for i in (1, 2):
        for bi, b in enumerate(asm.batches[i]):
            pts_all.append(b.points.reshape(-1, 2))
            index.append((i, bi, b.points.shape[:2]))
    P = np.vstack(pts_all)
    pre = stack.preimages(P, n, k)  # pre[j-1] = X^{n, n-j}(P)
    by_step = {hh.step: hh.velocity for hh in history}
    total = {1: np.zeros((len(P), 2)), 2: np.zeros((len(P), 2))}
    mesh = asm.mesh
    from .fespace import locate_points

    for j in range(1, k + 1):
        f = by_step[n - j]
        e, xi, eta = locate_points(mesh, pre[j - 1])
        for i in (1, 2):
            total[i] += (-lam[j] / tau) * eval_local(f, i, e, xi, eta)
    out: dict[int, list[NDArray]] = {1: [], 2: []}
    start = 0
    for i, bi, shape in index:
        m = shape[0] * shape[1]
        out[i].append(total[i][start:start + m].reshape(shape + (2,)))
        start += m
    return out


def step_rhs(asm: Assembler, case: Case, t: float, hist: dict[int, list[NDArray]] | None,
             g0_penalty: bool = True) -> NDArray:
    """Right-hand side of one time step (forcing, history, stabilisation, jumps)."""
    s = asm.stab_scale()
    nu = asm.params.nu
    rhs = np.zeros(asm.N)
    for i in (1, 2):
        vals = []
        for bi, b in enumerate(asm.batches[i]):
            F = case.forcing(i, b.points, t)
            if hist is not None:
                F = F + hist[i][bi]
            vals.append(F)
        rhs += asm.velocity_load(i, None, "phi", values=vals)
        rhs += (s / nu[i - 1]) * asm.pressure_load(i, None, "grad", values=vals)
    rhs += asm.jump_data_load(lambda X, n: case.g0(X, n, t), lambda X, n: case.g1(X, n, t), g0_penalty=g0_penalty)
    return rhs


def solve_step(geom: Geometry, case: Case, history: list[History], stack: FlowMapStack,
               scheme: BDFScheme, tau: float, g0_penalty: bool = True) -> tuple[NDArray, float]:
    """Assemble and solve the system of step ``geom.step``."""
    asm = geom.asm
    lam = scheme.lam_float
    hist = history_values(asm, history, stack, geom.step, lam, tau)
    rhs = step_rhs(asm, case, geom.t, hist, g0_penalty)
    idx, vals = dirichlet_values(asm, case, geom.t)
    system = SaddleSystem(asm.K1(lam[0], tau), rhs, idx, vals)
    return system.solve()


def _advance_markers(markers: MarkerChain, step_map: OneStepMap, eta: float, redistribute: bool) -> MarkerChain:
    new = markers.with_points(step_map(markers.points))
    if redistribute:
        new = redistribute_markers(new, eta)
    check_chain(new)
    return new


def run(config: RunConfig, case: Case | None = None, progress=None) -> RunResult:
    """March the configured case to ``T`` and accumulate the error measures.

    Steps ``0..k-1`` are initialised with interpolants of the exact solution;
    the error sums run over the solved steps ``n = k..N``.
    """
    case = case or make_case(config.case, nu=config.nu, T=config.T)
    k = config.k
    tau = config.step
    N = config.n_steps
    mesh = StructuredMesh(config.nc)
    params = config.params
    scheme = BDFScheme(k)
    tab = tableau_for(k)
    stack = FlowMapStack(depth=k)
    cfg = asdict(config)
    result = RunResult(cfg, {}, [])
    sums = {"u0": 0.0, "u1": 0.0, "p0": 0.0, "p1": 0.0}
    snap_steps = {int(round(ts / tau)): ts for ts in config.snapshot_times}

    def snapshot(n, spline):
        if n in snap_steps:
            _, p = spline.sample(400)
            label = f"{snap_steps[n]:g}"
            result.snapshots[label] = p.tolist()
            result.interfaces[label] = spline

    markers = initial_markers(case, config.eta, config.n_markers)
    history: list[History] = []
    geom = None
    last_terms = None
    try:
        for n in range(0, N + 1):
            t0 = time.perf_counter()
            t = n * tau
            if n > 0:
                step_map = OneStepMap((n - 1) * tau, tau, tab, case.field)
                stack.push(n, step_map)
                markers = _advance_markers(markers, step_map, config.eta, config.redistribute)
            if config.case == "tracking-only":
                spline = fit_periodic_spline(markers)
                snapshot(n, spline)
                result.diagnostics.append(StepDiagnostics(n, t, 0.0, 0.0, 0, 0.0, spline.area(), spline.length(), 0.0,
                                                          time.perf_counter() - t0))
                continue
            geom = Geometry.build(n, t, markers, mesh, k, params, config.quad_order, config.n_if)
            asm = geom.asm
            snapshot(n, geom.spline)
            if n < k:
                u = interpolate((lambda X: case.velocity(1, X, t), lambda X: case.velocity(2, X, t)), asm.c, k)
                shift = pressure_shift(asm, case.pressure, t)
                ph = interpolate((lambda X: case.pressure(1, X, t) - shift, lambda X: case.pressure(2, X, t) - shift),
                                 asm.c, k - 1)
                x = asm.dofs.gather(u, ph)
                # remove the interpolation defect of the mean so the constraint holds discretely
                pd = slice(asm.dofs.n_vel, asm.dofs.multiplier)
                x[pd] -= (asm.constraint @ x) / asm.constraint[pd].sum()
                res = 0.0
                if N < k and n == N:
                    last_terms = error_terms(asm, x, case, t)
            else:
                x, res = solve_step(geom, case, history, stack, scheme, tau, config.g0_penalty)
                u, _ = asm.dofs.split(x)
                terms = error_terms(asm, x, case, t)
                for key in ("u1", "p0", "p1"):
                    sums[key] += tau * terms[key]
                last_terms = terms
                result.steps_solved += 1
            history.append(History(n, u))
            history = [hh for hh in history if hh.step > n - k]
            qd = asm.quad
            cut_areas = [min(v[0].measure, v[1].measure) for v in qd.volume.values()]
            unorm = math.sqrt(error_norm_sq(asm, x))
            result.diagnostics.append(StepDiagnostics(
                n, t, unorm, res, int(asm.c.cut.sum()), float(min(cut_areas)) if cut_areas else 0.0,
                geom.spline.area(), geom.spline.length(), mean_constraint_value(asm, x), time.perf_counter() - t0,
            ))
            if progress is not None:
                progress(result.diagnostics[-1])
    except UnfittedError as exc:
        result.status = "failed"
        result.failure = f"{type(exc).__name__}: {exc}"
        logger.error("run failed: %s", result.failure)
    if config.case != "tracking-only" and last_terms is not None:
        result.errors = {
            "e_u0": math.sqrt(last_terms["u0"]),
            "e_u1": math.sqrt(sums["u1"]),
            "e_p0": math.sqrt(sums["p0"]),
            "e_p1": math.sqrt(sums["p1"]),
        }
    return result


def error_norm_sq(asm: Assembler, x: NDArray) -> float:
    """``sum_i ||u_h,i||^2`` over the phase regions."""
    total = 0.0
    for i in (1, 2):
        for b, v in zip(asm.batches[i], batch_values(asm, i, x)):
            total += float(np.sum(np.broadcast_to(b.weights, v["u"].shape[:2]) * np.sum(v["u"] ** 2, axis=-1)))
    return total


# ---- markers-only tracking ---------------------------------------------------------


def track_markers(markers: MarkerChain, field, k: int, tau: float, n_steps: int, t0: float = 0.0,
                  eta: float | None = None, redistribute: bool = True) -> list[MarkerChain]:
    """Advance a marker chain with the RK method of order ``k + 1``.

    Returns the chains of steps ``0..n_steps``.
    """
    tab = tableau_for(k)
    out = [markers]
    for n in range(1, n_steps + 1):
        step_map = OneStepMap(t0 + (n - 1) * tau, tau, tab, field)
        markers = _advance_markers(markers, step_map, eta if eta is not None else markers.eta, redistribute)
        out.append(markers)
    return out


def interface_error(spline: SplineInterface, exact, n: int = 4000) -> float:
    """Maximum over the material parameter of ``|spline(l) - exact(l)|``.

    Markers keep the parameter of the material point they were created at,
    so comparing at equal parameters measures the trajectory error of the
    tracked curve.  ``exact`` is a callable of ``l`` or another spline.
    """
    l = np.linspace(0.0, spline.period, n, endpoint=False)
    ref = exact.eval(l) if isinstance(exact, SplineInterface) else np.asarray(exact(l))
    return float(np.max(np.linalg.norm(spline.eval(l) - ref, axis=1)))
