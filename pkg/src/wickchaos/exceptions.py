"""Exception hierarchy shared by all wickchaos modules."""


class WickChaosError(Exception):
    """Base class for every error raised by this package."""


class CapacityError(WickChaosError):
    """An index set or assembled system exceeds a configured size limit."""


class MissingSeedError(WickChaosError, KeyError):
    pass


class PolicyViolationError(WickChaosError, ValueError):
    """A multi-index does not satisfy the active truncation policy."""


class GridMismatchError(WickChaosError, ValueError):
    pass


class EllipticityError(WickChaosError, ValueError):
    """The metric coefficient ``a`` is not uniformly positive and bounded."""


class DegenerateFitError(WickChaosError, ValueError):
    pass


class SolverConvergenceError(WickChaosError, RuntimeError):
    """The iterative linear solve inside a Crank-Nicolson step did not converge."""


class BlowUpError(WickChaosError, RuntimeError):
    """The rational sub-flow of the Wick-square solver hit its denominator guard."""


class NonContractionError(WickChaosError, RuntimeError):
    """Picard updates grew for several consecutive iterations."""


class BallExitError(WickChaosError, RuntimeError):
    """A Picard iterate left the declared Lipschitz validity ball."""


class ConfigParseError(WickChaosError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigValidationError(WickChaosError):
    """Collects every validation problem found in a scenario file."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
