"""Exception hierarchy shared by all moshlab modules."""


class MoshlabError(Exception):
    """Base class for all package errors."""


class InputShapeError(MoshlabError):
    """Array length or shape does not match the grid it claims to live on."""


class InsufficientDataError(MoshlabError):
    """Too few samples for the requested stencil."""


class ModelInvalidError(MoshlabError):
    """Requested physical model has no bound solution (e.g. unbound relative motion)."""


class NumericError(MoshlabError):
    """A numerical procedure failed to converge; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InstabilityError(NumericError):
    """Propagation lost unitarity; advise a smaller time step."""


class QuadratureError(NumericError):
    """Adaptive quadrature refinement failed to converge."""


class DegenerateInputError(MoshlabError):
    """Input field is degenerate (e.g. density below the evaluation floor everywhere)."""


class UnsupportedScopeError(MoshlabError):
    """Operation is restricted by design to a narrower model class."""


class SingularKernelError(MoshlabError):
    """Equal-time kernel derivative K(t) is singular; Volterra solve refused."""


class StepSizeError(MoshlabError):
    """Finite-difference step is not in the first-order-stable regime."""


class ConfigError(MoshlabError):
    """Scenario configuration failed validation before any compute."""
