"""Exception types raised across the package."""


class CavSafeError(Exception):
    """Base class for all package errors."""


class ParseError(CavSafeError):
    """A scenario document could not be parsed."""


class ValidationError(CavSafeError, ValueError):
    """A scenario violates an invariant. ``field`` names the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class NotOnPath(CavSafeError):
    pass


class NoSharedConflict(CavSafeError):
    pass


class UnknownPath(CavSafeError, KeyError):
    pass


class DomainError(CavSafeError, ValueError):
    pass


class InfeasibleEntry(CavSafeError, ValueError):
    """Entry speed lies outside ``[v_min, v_max]``."""


class SingularSystem(CavSafeError):
    pass


class StaleSnapshot(CavSafeError):
    """The coordinator database changed after the caller took its snapshot."""


class EmptyFeasibleGrid(CavSafeError):
    pass


class NumericalBreakdown(CavSafeError):
    pass


class UnknownKind(CavSafeError, ValueError):
    pass
