"""Exception hierarchy shared by all coreness modules."""


class CorenessError(Exception):
    """Base class for every error raised by this package."""


class InvalidNode(CorenessError, IndexError):
    pass


class ProbabilityOverflow(CorenessError, ValueError):
    pass


class InvalidExponent(CorenessError, ValueError):
    pass


class DegenerateGroup(CorenessError, ArithmeticError):
    """EM produced a group with (numerically) zero total membership."""


class NoSpectrum(CorenessError, ValueError):
    """The requested spectral operator has no usable leading eigenvector."""


class ZeroVector(CorenessError, ValueError):
    pass


class DegenerateTruth(CorenessError, ValueError):
    pass


class UndefinedCorrelation(CorenessError, ValueError):
    pass


class ParseError(CorenessError, ValueError):
    def __init__(self, message, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}: "
        super().__init__(where + message)


class EmptyGraph(CorenessError, ValueError):
    pass


class ConfigError(CorenessError, ValueError):
    pass
