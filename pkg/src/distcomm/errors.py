"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment configuration (bad JSON, bad field values)."""


class InfeasibleDistortion(ValueError):
    """Requested distortion target lies outside the feasible range."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap without converging."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual
