"""Exception hierarchy shared by every ppslab module."""

from __future__ import annotations


class PPSLabError(Exception):
    """Base class for all ppslab errors."""


class DimensionMismatch(PPSLabError):
    pass


class DimensionCapExceeded(PPSLabError):
    pass


class NotNormalized(PPSLabError):
    pass


class NotHermitian(PPSLabError):
    def __init__(self, residual: float, tol: float):
        self.residual = residual
        super().__init__(f"matrix is not Hermitian: max|M - M^dagger| = {residual:.3e} > {tol:.1e}")


class NotIdempotent(PPSLabError):
    def __init__(self, residual: float, tol: float):
        self.residual = residual
        super().__init__(f"matrix is not idempotent: max|M^2 - M| = {residual:.3e} > {tol:.1e}")


class NonIntegerTrace(PPSLabError):
    pass


class NotAnEffect(PPSLabError):
    """Eigenvalues of a POVM element fall outside [0, 1]."""


class NotAMeasurement(PPSLabError):
    """Projectors are not mutually orthogonal or do not sum to the identity."""


class NotTracePreservingTotal(PPSLabError):
    """The branches of an instrument do not sum to a trace-preserving map."""


class NotCoarseGraining(PPSLabError):
    """A projector is not a sum of outcomes of the given measurement."""


class PostselectionImpossible(PPSLabError):
    def __init__(self, message: str, projector_label: str | None = None):
        self.projector_label = projector_label
        super().__init__(message)


class OrthogonalPrePost(PPSLabError):
    pass


class ScenarioError(PPSLabError):
    pass


class ClosureBudgetExceeded(PPSLabError):
    def __init__(self, size: int, max_size: int):
        self.size = size
        self.max_size = max_size
        super().__init__(f"closure did not reach a fixpoint within {max_size} elements (current size {size})")


class MissingElement(PPSLabError):
    pass


class NumericallyIndeterminate(PPSLabError):
    def __init__(self, margin: float, message: str = ""):
        self.margin = margin
        super().__init__(message or f"feasibility margin {margin:.3e} is within the indeterminate band")


class TooLarge(PPSLabError):
    pass


class UnknownLabel(PPSLabError):
    pass


class OperatorMismatch(PPSLabError):
    pass


class ModelError(PPSLabError):
    """A finite ontological model violates its own structural invariants."""


class ModelDoesNotReproduce(PPSLabError):
    pass


class ParseError(PPSLabError):
    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)
