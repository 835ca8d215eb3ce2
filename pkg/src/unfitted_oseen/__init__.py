"""High-order unfitted finite elements for Oseen flow with a moving interface.

The interface is tracked with markers advected by an explicit Runge-Kutta
flow map and represented by a periodic cubic spline; both phases are
discretised on a fixed square mesh with Nitsche coupling, ghost-penalty
stabilisation and BDF time stepping along characteristics.
"""

from __future__ import annotations

from .assembly import Assembler, BDFScheme, PenaltyParams, SaddleSystem, bdf_coefficients
from .cases import CASES, Case, ManufacturedOseenCase, SteadyPolyCase, make_case
from .errors import FlowMapError, GeometryError, MeshError, SolverError, UnfittedError
from .flowmap import FlowMapStack, OneStepMap, RKTableau, tableau_for
from .geometry import MarkerChain, SplineInterface, fit_periodic_spline, redistribute_markers
from .harness import EocTable, convergence_study
from .mesh import StructuredMesh, classify
from .quadrature import CutQuadrature
from .solver import RunConfig, RunResult, run, stokes_projection

__version__ = "0.1.0"

__all__ = [
    "Assembler", "BDFScheme", "CASES", "Case", "CutQuadrature", "EocTable", "FlowMapError", "FlowMapStack",
    "GeometryError", "MarkerChain", "MeshError", "OneStepMap", "ManufacturedOseenCase", "PenaltyParams", "RKTableau",
    "RunConfig", "RunResult", "SaddleSystem", "SolverError", "SplineInterface", "SteadyPolyCase", "StructuredMesh",
    "UnfittedError", "bdf_coefficients", "classify", "convergence_study", "fit_periodic_spline", "make_case",
    "redistribute_markers", "run", "stokes_projection", "tableau_for",
]
