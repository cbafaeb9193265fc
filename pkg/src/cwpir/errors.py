"""Exception hierarchy shared across the package."""


class CwPirError(Exception):
    """Base class for errors raised by this package."""


class ParameterMismatch(CwPirError, ValueError):
    """Operands were built over different ring or scheme parameters."""


class BackendMismatch(CwPirError, TypeError):
    """A ciphertext was handed to a backend that did not produce it."""


class DepthExceeded(CwPirError):
    """The transparent backend's multiplicative depth cap was hit."""


class MissingGaloisKey(CwPirError, KeyError):
    """No key-switching material for the requested automorphism."""


class NotFound(CwPirError, LookupError):
    """The queried identifier is not stored in the database."""


class ProtocolError(CwPirError):
    """Malformed or unexpected wire data."""
