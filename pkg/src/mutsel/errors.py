"""Exception hierarchy shared by the library and the CLI."""


class MutselError(Exception):
    """Base class for all library errors."""


class InvalidArgument(MutselError, ValueError):
    pass


class OutOfDomain(MutselError, ValueError):
    pass


class NoEigenvalue(MutselError, ValueError):
    pass


class DegenerateProfile(MutselError, ValueError):
    pass


class NumericalFailure(MutselError, RuntimeError):
    """Raised when a solver produces non-finite or inadmissible values.

    ``t`` holds the simulation time at which the failure was detected, when
    there is one.
    """

    def __init__(self, message, t=None):
        super().__init__(message if t is None else f"{message} (t={t!r})")
        self.t = t


class ConfigError(MutselError, ValueError):
    """Invalid run configuration; ``path`` points at the offending key."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message
