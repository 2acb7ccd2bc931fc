"""Exception taxonomy shared by all solver modules.

Configuration-class errors map to CLI exit code 2, numerical failures to
exit code 3; see :mod:`plastiflow.cli`.
"""


class PlastiflowError(Exception):
    """Base class for all package-specific errors."""


# -- configuration / input errors -------------------------------------------

class ConfigError(PlastiflowError):
    """Invalid or inconsistent run configuration."""


class NonPositiveExtent(ConfigError):
    """Domain extent must be strictly positive."""


class GridMisaligned(ConfigError):
    """Grid spacing does not tile the domain extent."""


class UnsupportedDomain(ConfigError):
    """Operation is restricted to a domain kind it did not receive."""


class DomainMismatch(ConfigError):
    """Two grid functions live on different domains."""


class NonFiniteInput(ConfigError):
    """Input field contains NaN or infinities."""


class InvalidTheta(ConfigError):
    """Coefficient ratio must exceed 1 for the two-lobe profiles."""


class InvalidTiling(ConfigError):
    """Tiling index combination that degenerates to the eigenfunction."""


class CompatibilityError(ConfigError):
    """Initial datum does not vanish on the Dirichlet boundary."""


class BadBracket(ConfigError):
    """Bisection bracket endpoints do not classify as (A, B)."""


class EmptySeries(ConfigError):
    """Plot request carries no data."""


class SnapshotMissing(ConfigError):
    """Requested time is not a stored snapshot."""


class WindowEmpty(ConfigError):
    """Fit window contains no snapshots."""


# -- numerical failures ------------------------------------------------------

class NumericalError(PlastiflowError):
    """Base class for runtime numerical failures."""


class NoConvergence(NumericalError):
    """Iteration cap exceeded before reaching the requested residual."""


class CflViolation(NumericalError):
    """Explicit time step violates the stability bound."""


class BlowUp(NumericalError):
    """Non-finite value produced by a time stepper (scheme bug)."""


class LookbackUnderflow(NumericalError):
    """Game lattice queried below its stored time range."""


class StoppingFailure(NumericalError):
    """Trajectory exceeded its hard step cap (should be unreachable)."""
