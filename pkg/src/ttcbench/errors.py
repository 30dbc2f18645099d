"""Exception types shared across the package."""


class TTCBenchError(Exception):
    """Base class for all package errors."""


class DegenerateHistory(TTCBenchError):
    """Every reference policy assigns probability zero to some accepted action."""


class UnknownAction(TTCBenchError):
    """Action id is not part of the instance."""


class InvalidM(TTCBenchError):
    """Rejection threshold below 1."""


class UnsupportedComparator(TTCBenchError):
    """Comparator puts mass on an action the proposal cannot produce."""


class TooLarge(TTCBenchError):
    """Exact enumeration would exceed the configured path cap."""


class PreconditionFailed(TTCBenchError):
    """A theorem-level precondition does not hold for this input."""


class GenerationExhausted(TTCBenchError):
    """Instance generator hit its attempt cap without a certified instance."""


class ParseError(TTCBenchError):
    """Malformed instance or results file."""


class SchemaVersionUnsupported(ParseError):
    """Instance file schema version not handled by this build."""


class EmptyInput(TTCBenchError):
    """An operation that needs at least one row received none."""
