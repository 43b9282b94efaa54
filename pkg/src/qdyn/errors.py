"""Exception types shared across the package."""


class InputDomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ConvergenceError(RuntimeError):
    """An iterative solver ran out of budget.

    The last residual is kept on the instance so callers (and the CLI) can
    report how far off the solver was.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class BranchError(ValueError):
    """The analytic Jacobian was requested off its branch of validity."""


class InteriorViolation(RuntimeError):
    """An ODE trajectory left the open simplex."""
