"""Exception hierarchy shared by the solver, diagnostics and CLI."""


class RLGLError(Exception):
    """Base class for all errors raised by this package."""


class InvalidTransitionMatrix(RLGLError, ValueError):
    pass


class DimensionMismatch(RLGLError, ValueError):
    pass


class NotIrreducible(RLGLError):
    pass


class DegenerateStationary(RLGLError, ValueError):
    pass


class KernelDimensionError(RLGLError):
    pass


class KernelMismatch(RLGLError):
    pass


class SingularFundamentalMatrix(RLGLError):
    pass


class BoundInapplicable(RLGLError):
    pass


class SingularBlock(RLGLError):
    pass


class InvalidRegime(RLGLError, ValueError):
    pass


class ZeroDerivative(RLGLError, ZeroDivisionError):
    pass


class ZeroResidual(RLGLError):
    pass


class InsufficientData(RLGLError):
    pass


class NonPositiveResidual(RLGLError, ValueError):
    pass


class InvalidSpec(RLGLError, ValueError):
    pass


class ParseError(RLGLError, ValueError):
    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class EmptyGraph(RLGLError, ValueError):
    pass


class DanglingNode(RLGLError, ValueError):
    def __init__(self, node):
        super().__init__(f"node {node} has no out-edges")
        self.node = node


class NetworkError(RLGLError, OSError):
    pass


class CacheCorrupt(RLGLError, OSError):
    pass


class TooLargeForDenseDiagnostics(RLGLError):
    pass


class EmptyInput(RLGLError, ValueError):
    pass


class BudgetExhausted(RLGLError):
    """Raised on request when a solve stops on its budget before reaching ``tol``.

    Carries the partial result so callers can still inspect the trace.
    """

    def __init__(self, pi_hat, trace):
        super().__init__(
            f"budget exhausted at step {trace.steps[-1]} "
            f"with l1 residual {trace.l1[-1]:.3e}"
        )
        self.pi_hat = pi_hat
        self.trace = trace
