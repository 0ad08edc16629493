"""Exception hierarchy shared by all modules."""


class AtmCoordError(Exception):
    """Base class for every error raised by this package."""


class GameInputError(AtmCoordError, ValueError):
    """Malformed or inconsistent input (bad index, dimension mismatch, bad range)."""


class SizeLimitError(AtmCoordError):
    """A configured enumeration or problem-size cap was exceeded."""


class UnsupportedError(AtmCoordError):
    """The requested operation is not available for this input shape."""


class NumericalError(AtmCoordError):
    """The LP engine hit its iteration cap or lost numerical consistency."""


class EmptyBasisError(AtmCoordError):
    """No Nash equilibria were found, so a reduced-rank basis cannot be built."""
