"""Exception hierarchy shared by every module."""


class LedlabError(Exception):
    """Base class for library errors."""


class ConfigError(LedlabError):
    """Invalid or inconsistent configuration.

    ``path`` names the offending key (dotted) when known.
    """

    def __init__(self, message, path=None):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class ResolutionError(LedlabError):
    """The grid cannot represent the requested feature or frequency."""


class NumericError(LedlabError):
    """A numerical kernel failed (non-finite values, solver breakdown)."""

    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message if step is None else f"{message} (step {step})")


class ContourError(LedlabError):
    """A quadrature contour passes too close to the spectrum."""

    def __init__(self, message, nearest=None):
        self.nearest = nearest
        super().__init__(message)


class PreconditionError(LedlabError):
    """An operation was called outside its domain of validity."""


class ConstructionError(LedlabError):
    """An object failed its own invariant checks while being built."""


class DichotomyAbsent(LedlabError):
    """No exponential separation could be fitted."""


class EpsilonTooLarge(LedlabError):
    """The perturbation is too large for the contraction argument."""

    def __init__(self, message, factor=None):
        self.factor = factor
        super().__init__(message)


class HorizonTooShort(LedlabError):
    """The truncation tail of a Perron sum exceeds the tolerance."""
