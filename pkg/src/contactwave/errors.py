"""Exception types shared across the solver, diagnostics and I/O layers."""


class ContactWaveError(Exception):
    """Base class for every error raised by this package."""


class InvalidParams(ContactWaveError, ValueError):
    pass


class GridTooCoarse(ContactWaveError):
    """A grid-based measurement changed by more than the allowed fraction under refinement."""


class StepRejected(ContactWaveError):
    """A trial step produced a non-positive or non-finite value; the caller should shrink dt."""


class BlowUp(ContactWaveError):
    """Step size fell below the floor while retrying rejected steps."""


class QuadratureNotConverged(ContactWaveError):
    pass


class InvalidInitialData(ContactWaveError, ValueError):
    pass


class TimeMismatch(ContactWaveError, ValueError):
    pass


class InsufficientData(ContactWaveError, ValueError):
    pass


class NonpositiveValue(ContactWaveError, ValueError):
    pass


class ConfigError(ContactWaveError, ValueError):
    """Configuration could not be parsed or validated.

    ``line`` is 1-based when known; ``field`` is the dotted key path.
    """

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class SchemaVersionError(ContactWaveError, ValueError):
    pass


class DomainError(ContactWaveError, ValueError):
    """Argument outside the domain of a function (e.g. a non-positive ratio in a logarithm)."""


class BudgetExceeded(ContactWaveError):
    """A run needed more steps than its resource budget allows."""
