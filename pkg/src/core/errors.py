"""Exception hierarchy for maximum-entropy inference and certification."""

from typing import Optional, Sequence


class MaxEntError(Exception):
    """Base exception for all library errors."""
    pass


class DimensionMismatchError(MaxEntError):
    """Raised when operands do not share the required dimension."""
    pass


class HermiticityError(MaxEntError):
    """Raised when a matrix is not self-adjoint within tolerance."""
    pass


class InvalidStateError(MaxEntError):
    """Raised when a matrix is not a valid density matrix."""
    pass


class ContractViolation(MaxEntError):
    """Raised when an internal invariant is broken."""
    pass


class PreconditionViolation(MaxEntError):
    """Raised when a caller-side precondition is not met."""
    pass


class NumericalBackendError(MaxEntError):
    """Raised when the eigensolver fails to converge."""
    pass


class ProblemValidationError(MaxEntError):
    """Raised when a problem, state or channel file fails validation."""
    pass


class SelfCheckError(MaxEntError):
    """Raised when a certified bound is violated at runtime."""

    def __init__(self, message: str, violations: Sequence[str] = ()):
        super().__init__(message)
        self.violations = list(violations)


class IdentityUnavailableError(MaxEntError):
    """Raised when a bound needing finite multipliers meets a boundary solution."""
    pass


class IndeterminateVerdictError(MaxEntError):
    """Raised when the feasibility search runs out of iterations undecided.

    Attributes:
        best_margin: Smallest support-function slack found
        best_direction: Unit direction achieving it
    """

    def __init__(self, message: str, best_margin: float, best_direction=None):
        super().__init__(message)
        self.best_margin = best_margin
        self.best_direction = best_direction


class InfeasibleMomentsError(MaxEntError):
    """Raised when target moments lie outside the moment body.

    Attributes:
        witness: Direction lambda* with <lambda*, m> > lambda_max(H_lambda*)
        margin: The (negative) slack at the witness
    """

    def __init__(self, message: str, witness, margin: float):
        super().__init__(message)
        self.witness = witness
        self.margin = margin


class BoundarySuspectedError(MaxEntError):
    """Raised when Newton multipliers run past the norm cap."""

    def __init__(self, message: str, lambda_=None, iterations: int = 0):
        super().__init__(message)
        self.lambda_ = lambda_
        self.iterations = iterations


class NonConvergenceError(MaxEntError):
    """Raised when an iterative solve exhausts its budget.

    Attributes:
        best_lambda: Best multiplier iterate found
        residual: Moment residual at the best iterate
        iterations: Iterations spent
        path_trace: Boundary path steps completed before the failure
    """

    def __init__(
        self,
        message: str,
        best_lambda=None,
        residual: float = float("nan"),
        iterations: int = 0,
        path_trace: Optional[list] = None,
    ):
        super().__init__(message)
        self.best_lambda = best_lambda
        self.residual = residual
        self.iterations = iterations
        self.path_trace = path_trace or []
