"""Exceptions raised across the toolkit. Only cli.run turns them into exit codes."""


class BetaEnsembleError(Exception):
    """Base class for every error raised by this package."""


class DomainError(BetaEnsembleError, ValueError):
    """Argument outside the domain of an operation."""


class AccuracyError(BetaEnsembleError, ArithmeticError):
    """Quadrature or ODE integration failed to reach the requested accuracy."""


class StepSizeError(AccuracyError):
    """Adaptive ODE step size underflowed."""


class SingularityError(BetaEnsembleError, ZeroDivisionError):
    """Two particles coincide where the interaction is evaluated."""


class ConvergenceError(BetaEnsembleError, ArithmeticError):
    """Jacobi sweeps exhausted before the off-diagonal norm vanished."""


class EmptySampleError(BetaEnsembleError, ValueError):
    """A statistic was requested over no data."""


class ConfigError(BetaEnsembleError, ValueError):
    """Invalid configuration. `option` names the offending setting."""

    def __init__(self, option, message):
        super().__init__(f"{option}: {message}")
        self.option = option
