"""Exception hierarchy.

Every failure raised by the library derives from :class:`FakePathError` so
callers can catch the whole family at once. Results that are *values* rather
than failures (an infeasible scatterer, an unbounded CRLB, an infinite bound)
are never raised.
"""


class FakePathError(Exception):
    """Base class for all library errors."""


class ValidationError(FakePathError, ValueError):
    """An input violates a documented invariant."""


class DimensionError(ValidationError):
    """A vector length or matrix size is not allowed."""


class DomainError(ValidationError):
    """A value lies outside the domain of a function (e.g. spatial frequency)."""


class DegenerateGeometryError(ValidationError):
    """Two points that must be distinct coincide."""


class ModelRangeError(ValidationError):
    """A delay exceeds the unambiguous range of the OFDM symbol."""


class ConfigurationError(ValidationError):
    """A system configuration cannot support the requested quantity."""


class ArityError(ValidationError):
    """Sequences or matrices have incompatible lengths or orderings."""


class AngleOverflowError(DomainError):
    """The shifted sine of a fake angle leaves [-1, 1]."""


class SubcarrierIndexError(FakePathError, IndexError):
    """Sub-carrier or pilot index out of range."""


class SingularNoiseError(ValidationError):
    """Noise variance is zero or negative."""


class UndefinedSNRError(ValidationError):
    """Signal energy is zero so an SNR (or a baseline noise level) is undefined."""


class UnsupportedDesignError(ValidationError):
    """The requested analysis does not support this precoder design."""


class AssumptionError(FakePathError):
    """A closed-form bound was requested outside the assumptions it relies on."""

    def __init__(self, message: str, failing: tuple[str, ...] = ()):
        super().__init__(message)
        self.failing = tuple(failing)


class ScenarioError(ValidationError):
    """A scenario document failed to parse or validate."""
