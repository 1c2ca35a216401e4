"""Exception hierarchy shared by all fdrkit modules."""


class FdrkitError(Exception):
    """Base class for every error raised by fdrkit."""


class InputError(FdrkitError, ValueError):
    """Bad data handed to a function (wrong length, unknown id, empty file)."""


class ParseError(InputError):
    """A text file could not be parsed; carries the offending line number."""

    def __init__(self, message, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"line {lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)


class DegenerateInputError(InputError):
    """Input that is formally valid but carries no information (zero variance)."""


class DomainError(FdrkitError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ConfigError(FdrkitError, ValueError):
    """Inconsistent or unusable configuration (bin counts, degrees, flags)."""


class FitError(FdrkitError, RuntimeError):
    """An iterative fit failed to converge or produced an invalid model."""

    def __init__(self, message, deviance=None):
        self.deviance = deviance
        super().__init__(message)


class NullFitError(FitError):
    """Empirical null estimation failed (e.g. no central peak)."""


class ExperimentError(FdrkitError, RuntimeError):
    """Too many simulation replicates failed."""


class ExtrapolationWarning(UserWarning):
    """A fitted density was evaluated well outside its binned range."""
