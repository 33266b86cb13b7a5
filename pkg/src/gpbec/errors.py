"""Exception types shared across modules."""


class DomainError(ValueError):
    """Arguments outside the mathematical domain of an operation."""


class EmptyLatticeError(ValueError):
    """A lattice cutoff that leaves no modes."""


class CapacityError(MemoryError):
    """Requested Hilbert-space dimension exceeds the memory budget."""

    def __init__(self, dimension: int, budget: int):
        super().__init__(f"dimension {dimension} exceeds the configured budget {budget}")
        self.dimension = dimension
        self.budget = budget


class NumericalError(ArithmeticError):
    """A solver missed its tolerance; ``residual`` holds the best value reached."""

    def __init__(self, message: str, residual: float | None = None):
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual
