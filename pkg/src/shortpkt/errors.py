"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value violates its documented constraint."""


class InfeasibleError(RuntimeError):
    """No parameter choice meets the reliability target.

    Carries the best candidate found so the caller can log or report it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best if best is not None else {}
