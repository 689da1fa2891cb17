"""Exception types shared across the package."""


class MhdensError(Exception):
    """Base class for all package errors."""


class MeshFormatError(MhdensError):
    """Raised when an ASCII mesh file cannot be parsed.

    Carries the 1-based line number where parsing failed.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MeshInvalidError(MhdensError):
    """Raised when a mesh violates a structural invariant."""


class SolverError(MhdensError):
    """Raised when a linear system cannot be factorized or solved."""


class ConfigurationError(MhdensError):
    """Raised for inconsistent run configuration (unknown tags, bad combos)."""


class InvariantError(MhdensError):
    """Raised when a provably-guaranteed runtime invariant is violated.

    These indicate implementation bugs, never user error: the auxiliary
    scalars are positive by theorem, so a nonpositive value must fail loudly.
    """
