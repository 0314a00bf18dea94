"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
numerical failures exit 3, and refusals outside the good set exit 4.
"""


class TreeGibbsError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(TreeGibbsError, ValueError):
    """Invalid parameters, malformed potential files, bad domains."""


class TailUndeclaredError(ConfigError):
    """Custom potential evaluated or summed beyond its table without a tail model."""


class NotSummableError(ConfigError):
    """The transfer operator is not in l1(Z), so class sums are undefined."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NumericalError(TreeGibbsError, RuntimeError):
    """A certified computation failed to converge within its iteration caps."""


class OutsideGoodSetError(TreeGibbsError, RuntimeError):
    """Contraction certificate unavailable: the norm pair is not in the good set.

    Carries the membership verdict so callers can inspect why.
    """

    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict
