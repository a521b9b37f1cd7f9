"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid run or grid configuration (CLI exit code 2)."""


class SolverError(RuntimeError):
    """A linear or eigen solver failed to converge (CLI exit code 3)."""

    def __init__(self, message: str, iterations: int | None = None, residual: float | None = None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class ResolutionError(ValueError):
    """Quadrature grid too coarse for the requested kernel width."""
