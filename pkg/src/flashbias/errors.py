"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand dimensions are incompatible."""


class MaskError(ValueError):
    """Mask is invalid for the given problem (e.g. causal with N != M)."""


class ConfigError(ValueError):
    """A configuration cannot be satisfied (e.g. SRAM budget too small)."""


class ValidationError(ValueError):
    """Input values violate a documented precondition."""


class TrainingError(RuntimeError):
    """Optimization diverged; carries the iteration where it happened."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration
