"""Exception types shared across the package.

CLI exit-code mapping: ConfigError -> 1, I/O (OSError, CheckpointIOError) -> 2,
BackendError -> 3, anything else -> 4.
"""


class QpressError(Exception):
    """Base class for package errors."""


class ConfigError(QpressError):
    """Bad or missing configuration."""


class InvalidImageError(QpressError):
    """Zero-size or undecodable raster input."""


class UnsupportedQualityError(QpressError):
    """Quality value not on the fixed ladder."""


class MismatchedSourceError(QpressError):
    """Size ratio requested across two different source images."""


class ZeroReferenceError(QpressError):
    """Reference payload has zero bytes; the ratio is undefined."""


class InsufficientMemoryError(QpressError):
    """Replay memory holds fewer transitions than one minibatch."""


class CheckpointIOError(QpressError):
    """Checkpoint file unreadable, truncated, or corrupt."""


class VersionMismatchError(CheckpointIOError):
    """Checkpoint written by an incompatible format version."""


class ExtractorMismatchError(QpressError):
    """Checkpoint was trained against a different feature extractor."""


class BackendError(QpressError):
    """Base class for vision-backend failures."""


class BackendUnavailableError(BackendError):
    """Transient backend failure (network error or 5xx); retryable."""


class BackendRejectedError(BackendError):
    """Backend rejected the request (4xx or unparseable reply); not retryable."""


class BackendTimeoutError(BackendError):
    """Backend did not answer within the configured deadline."""
