"""Exception hierarchy shared by all subpackages."""

from typing import Iterable, Optional


class GeometryError(ValueError):
    """Invalid boundary or tessellation request."""

    def __init__(self, message: str, vertex_ids: Optional[Iterable[int]] = None):
        self.vertex_ids = sorted(int(v) for v in vertex_ids) if vertex_ids is not None else []
        if self.vertex_ids:
            shown = ", ".join(str(v) for v in self.vertex_ids[:20])
            suffix = " ..." if len(self.vertex_ids) > 20 else ""
            message = f"{message} (vertices: {shown}{suffix})"
        super().__init__(message)


class OrientationError(GeometryError):
    """Boundary orientation is inconsistent or encloses nonpositive volume."""


class NonManifoldError(GeometryError):
    """Connectivity is not a closed orientable manifold."""


class UnsupportedOperationError(ValueError):
    """Operation is not defined for the given dimension or input."""


class ConstraintViolationError(ValueError):
    """A test function violates the zero-average constraint."""


class VertexCapExceededError(ValueError):
    """Dense assembly requested above the configured vertex cap."""


class ConfigError(ValueError):
    """Run configuration is invalid."""


class NumericalFailure(RuntimeError):
    """A numerical procedure did not produce a usable result."""


class EigensolveError(NumericalFailure):
    """Generalized eigensolve failed."""

    def __init__(self, message: str, iterations: Optional[int] = None):
        self.iterations = iterations
        if iterations is not None:
            message = f"{message} after {iterations} iterations"
        super().__init__(message)


class FlowStallError(NumericalFailure):
    """Step size underflow: no energy-decreasing step was found."""

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class MeshQualityError(NumericalFailure):
    """Mesh quality collapsed during a flow."""

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class CheckFailedError(AssertionError):
    """One or more verification checks of a run failed."""

    def __init__(self, failed: Iterable[str]):
        self.failed = list(failed)
        super().__init__(f"checks failed: {', '.join(self.failed)}")
