"""Exception hierarchy shared by the library and the command-line tool."""


class PartialCoinError(Exception):
    """Base class for all errors raised by :mod:`partialcoin`."""


class DomainError(PartialCoinError, ValueError):
    """A parameter lies outside the domain where a formula is defined."""


class ConfigurationError(PartialCoinError, ValueError):
    """Inputs are individually valid but do not fit together."""


class InterlacingError(PartialCoinError):
    """The coupled CDF pair does not interlace, so flips are not 0/1 valued."""


class TailOverflow(PartialCoinError):
    """A sequential sampler ran past its trial cap without a success."""

    def __init__(self, k_max: int):
        super().__init__(f"no success within {k_max} trials")
        self.k_max = k_max
