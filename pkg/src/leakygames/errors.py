"""Exception hierarchy shared across the package."""


class LeakyGamesError(Exception):
    """Base class for all package errors."""


class InputError(LeakyGamesError):
    """Malformed or invalid user input (instances, strategies, configs)."""


class SizeGuardError(LeakyGamesError):
    """An exact method was requested beyond its tractable size guard."""


class ConvergenceError(LeakyGamesError):
    """An iterative solver failed to reach its required residual."""
