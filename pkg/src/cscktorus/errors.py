"""Exception hierarchy shared by the numerical core and the command line."""


class CsckError(Exception):
    """Base class for every error raised by this package."""


class NotKahler(CsckError, ValueError):
    """The form ``I + Hess(u)`` fails to be positive definite at some node."""

    def __init__(self, node, eigenvalue, eps_pd):
        self.node = tuple(int(i) for i in node)
        self.eigenvalue = float(eigenvalue)
        self.eps_pd = eps_pd
        super().__init__(
            f"metric not positive definite at node {self.node}: "
            f"min eigenvalue {self.eigenvalue:.3e} <= eps_pd={eps_pd:.1e}"
        )


class SolverError(CsckError, RuntimeError):
    """A nonlinear step could not be solved."""


class MaxIterations(SolverError):
    """Newton stalled or ran out of iterations."""

    def __init__(self, message, residual_sup=float("nan"), iterations=0):
        self.residual_sup = residual_sup
        self.iterations = iterations
        super().__init__(message)


class KrylovBreakdown(SolverError):
    """The inner GMRES solve failed to reach its relative tolerance."""


class StepFailed(CsckError, RuntimeError):
    """An iteration step failed even after continuation.

    The partial trace (up to and including step ``index``) is attached.
    """

    def __init__(self, index, trace, cause):
        self.index = index
        self.trace = trace
        self.cause = cause
        super().__init__(f"step {index} failed: {cause}")


class MonotonicityViolation(CsckError, AssertionError):
    def __init__(self, index, quantity, slack):
        self.index = index
        self.quantity = quantity
        self.slack = slack
        super().__init__(f"{quantity} violated at step {index} (slack {slack:.3e})")


class Unstable(CsckError, RuntimeError):
    """Time integration blew up."""


class ParseError(CsckError, ValueError):
    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class ValidationError(CsckError, ValueError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
