"""Exception hierarchy."""


class OnOffNetError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(OnOffNetError, ValueError):
    pass


class DomainError(OnOffNetError, ValueError):
    pass


class EmptyNetworkError(OnOffNetError, ValueError):
    pass


class UnderflowError(OnOffNetError, ArithmeticError):
    pass


class UndefinedMeanError(OnOffNetError, ArithmeticError):
    pass


class OutOfRegimeError(OnOffNetError, ValueError):
    """The effective active-link count n*q - xi*sqrt(n*q) is not positive."""


class BracketError(OnOffNetError, ValueError):
    pass


class SizeGuardError(OnOffNetError, ValueError):
    pass
