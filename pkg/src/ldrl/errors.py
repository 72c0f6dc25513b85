"""Exception types shared across the package.

Two families matter for the CLI exit-code contract: bad inputs
(models, mazes, configs) map to exit code 2, numerical failures
(non-convergence, degeneracies, overflow) map to exit code 3.
"""


class InputError(ValueError):
    """A model, maze, distribution or config violates its contract."""


class SolverError(RuntimeError):
    """A numerical routine failed (non-convergence, degeneracy, overflow)."""


class NonConvergenceError(SolverError):
    """Iteration budget exhausted; carries the last residual seen."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class DegenerateVectorError(SolverError):
    """An eigenvector lost positivity beyond the representable floor."""


class AbsoluteContinuityError(SolverError):
    """Controlled kernel puts mass where the prior kernel has none."""
