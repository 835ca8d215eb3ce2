"""Exception types raised by the solver stack."""


class UnfittedError(RuntimeError):
    """Base class for all package errors."""


class GeometryError(UnfittedError):
    """Invalid or degenerate interface geometry."""


class FlowMapError(UnfittedError):
    """Flow-map inversion failed or a map is missing from the stack."""


class MeshError(UnfittedError):
    """Mesh classification is inconsistent with the interface."""


class QuadratureError(UnfittedError):
    """A cut-cell quadrature rule could not be built."""


class SolverError(UnfittedError):
    """The linear system is singular or the solve is inaccurate."""
