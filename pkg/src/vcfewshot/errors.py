"""Exception hierarchy shared across the toolkit.

Two broad families matter to callers: :class:`InputError` for anything a
user can fix (bad files, bad flags, violated preconditions) and
:class:`NumericalError` for genuine numerical failures that should never be
papered over. The CLI maps them to exit codes 1 and 2 respectively.
"""


class VcError(Exception):
    """Base class for all library-specific errors."""


class InputError(VcError):
    """Invalid input: bad file, violated precondition, or invariant breach."""


class NumericalError(VcError):
    """A computation produced non-finite or otherwise unusable values."""


class StoreFormatError(InputError):
    """A feature-store byte stream could not be parsed.

    ``offset`` is the byte position at which parsing failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class BadMagicError(StoreFormatError):
    """Stream does not start with the expected magic bytes."""


class UnsupportedVersionError(StoreFormatError):
    """Stream declares a format version this reader does not understand."""


class TruncatedPayloadError(StoreFormatError):
    """Stream ended before a declared field or payload was complete."""


class TrailingDataError(StoreFormatError):
    """Stream contains bytes beyond the end of the encoded store."""


class InvalidFieldError(StoreFormatError):
    """A parsed field has an illegal value (zero dimension, bad UTF-8, ...)."""


class NonFiniteDataError(StoreFormatError):
    """Feature data contains NaN or infinity."""


class DuplicateImageIdError(StoreFormatError):
    """Two grids in one store share an image id."""


class UnknownCategoryError(StoreFormatError):
    """A grid references a category id missing from the category table."""


class NoFeasibleThresholdError(InputError):
    """No grid point reaches the requested coverage target."""


class ZeroEncodingError(InputError):
    """An operation requiring set bits was given an all-zero encoding."""
