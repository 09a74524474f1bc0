"""Exception types shared by the solvers and the CLI."""

from __future__ import annotations


class TollError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(TollError, ValueError):
    """Invalid user input: bad descriptor, out-of-range parameter, malformed file."""


class SolverError(TollError):
    """A numerical routine failed to produce a trustworthy answer."""


class NumericalFailure(SolverError):
    """LP residuals could not be driven below tolerance, or two solver paths disagree."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class PoaInfinite(SolverError):
    """The mechanism admits equilibria that are unboundedly worse than optimum."""


class BoundVacuous(SolverError):
    """No smoothness certificate exists for the requested parameters."""


class InfeasibleAlpha(ConfigError):
    """Requested PoA level is below the minimum achievable one."""

    def __init__(self, alpha: float, min_poa: float):
        super().__init__(f"alpha={alpha:.6f} is below the minimum achievable PoA {min_poa:.6f}")
        self.alpha = alpha
        self.min_poa = min_poa


class TailNotSettled(SolverError):
    """A tail minimization attains its minimum at the scan horizon."""


class CapExceeded(ConfigError):
    """The assignment space of a game is larger than the enumeration cap."""
