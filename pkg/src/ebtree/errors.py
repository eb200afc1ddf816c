"""Exception hierarchy shared across the package.

Wire error codes map onto these types; see ebtree.wire.
"""


class EBTreeError(Exception):
    """Base class for all package errors."""


class RangeError(EBTreeError):
    """Position outside [1, N] (or [1, N+1] for insertion), or empty file."""


class CodecError(EBTreeError):
    """Malformed bytes: bad digest length, truncated record, invalid message."""


class ContractViolation(EBTreeError):
    """An internal operation was invoked outside its precondition."""


class InvariantViolation(EBTreeError):
    """A structural check over a tree or store found corrupted state."""


class NotFoundError(EBTreeError):
    """Unknown file id or version number."""


class ConflictError(EBTreeError):
    """A concurrent mutation won; the caller's view of the latest version is stale."""


class IntegrityError(EBTreeError):
    """Stored or transmitted data failed an integrity check (CRC, AEAD tag)."""


class ConfigError(EBTreeError):
    """Invalid configuration value (key/seed length, block size, addresses)."""


class AuthError(EBTreeError):
    """Bearer token missing or wrong."""


class TransportError(EBTreeError):
    """Connection failed or the peer answered with garbage."""
