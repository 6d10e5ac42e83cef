"""
Error types raised by the mechsqueeze services.

Validation problems derive from ValueError and numerical failures from
RuntimeError, so callers that only know the builtin hierarchy still work.
"""


class SqueezeError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(SqueezeError, ValueError):
    """Scenario file could not be parsed or failed validation."""


class ThresholdError(SqueezeError, ValueError):
    """OPO pumped at or above threshold (|epsilon| >= gamma_o/2)."""


class MissingSourceError(SqueezeError, ValueError):
    """A squeezed input has no OPO representation for the exact solver."""


class NotDerivedError(SqueezeError, LookupError):
    """A quantity of the power-drive chain was requested on a G-driven parameter set."""


class NumericalError(SqueezeError, RuntimeError):
    pass


class InstabilityError(NumericalError):
    """Dynamically unstable configuration."""


class ConvergenceError(NumericalError):
    pass


class BistabilityError(NumericalError):
    """No fixed point for the power-driven effective detuning."""
