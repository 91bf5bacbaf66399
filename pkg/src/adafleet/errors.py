"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


class DegenerateInput(ValueError):
    """Window carries no variation to analyse."""


class NonConvergence(RuntimeError):
    """Iterative estimator pinned to its bounds on every component."""


class WindowTooSmall(ValueError):
    pass


class MalformedRoute(ValueError):
    pass


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class InvariantViolation(AssertionError):
    pass
