"""Exception hierarchy. The CLI maps these onto its exit codes."""


class PlanarTrapError(Exception):
    """Base class for all package errors."""


class ConfigError(PlanarTrapError):
    """Bad config file, schema violation or model-invariant violation."""


class NumericError(PlanarTrapError):
    """A solver or analysis step failed numerically."""


class SolverError(NumericError):
    """BEM assembly/solve failure (singular system, budget exceeded)."""


class OutOfRegionError(NumericError):
    """Field evaluation requested outside the valid region."""


class UntrappedError(NumericError):
    """No pseudopotential minimum (monotone potential) for these settings."""


class NoResonanceError(NumericError):
    """Tickle scan found no resonance in the requested range."""


class FitError(NumericError):
    """Nonlinear or linear least-squares fit failed or input degenerate."""


class AntiTrappingError(NumericError):
    """Stray-field gradient strong enough to make omega_1^2 <= 0."""
