"""Exception hierarchy shared across the toolkit."""


class RkhsBarrierError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatchError(RkhsBarrierError):
    """Operands have incompatible dimensions."""


class FactorizationError(RkhsBarrierError):
    """A regularized Gram system is not positive definite to working precision."""


class DegreeBookkeepingError(RkhsBarrierError):
    """A polynomial identity cannot be represented in the chosen bases."""


class SynthesisInfeasibleError(RkhsBarrierError):
    """The semidefinite relaxation reported infeasibility (or unboundedness)."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class ExtractionError(RkhsBarrierError):
    """A solver answer could not be turned into a trustworthy certificate."""


class CertificateParseError(RkhsBarrierError):
    """A certificate document is malformed or incomplete."""


class ConfigError(RkhsBarrierError):
    """A run configuration is malformed; carries file/line context."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:" if line is None else f"{path}:{line}:"
        super().__init__(f"{loc} {message}".strip())
        self.path = path
        self.line = line
