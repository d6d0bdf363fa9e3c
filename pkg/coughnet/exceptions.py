"""
Exception hierarchy.

Library modules raise these; the command layer turns them into log
messages and exit codes.
"""


class CoughnetError(Exception):
    """Base class for all errors raised by coughnet."""


class MalformedContainer(CoughnetError):
    """The file is not a well-formed RIFF/WAVE container."""


class UnsupportedEncoding(CoughnetError):
    """The WAVE data is compressed or uses an unsupported bit depth."""


class EmptyAudio(CoughnetError):
    """The WAVE data chunk holds zero frames."""


class LengthMismatch(CoughnetError):
    """A clip does not have the canonical number of samples."""


class RateOutOfRange(CoughnetError):
    """Time-stretch rate outside the supported interval."""


class SemitonesOutOfRange(CoughnetError):
    """Pitch shift outside the supported interval."""


class OneClassOnly(CoughnetError):
    """An operation that needs both labels saw only one."""


class ClassTooSmall(CoughnetError):
    """A class has fewer members than the number of folds."""


class LabelOutOfDomain(CoughnetError):
    """A label is not 0 or 1."""


class ShapeMismatch(CoughnetError):
    """Array shapes do not agree with what a layer expects."""


class InferBeforeTrain(CoughnetError):
    """Batch norm asked for inference before any running statistics."""


class StaleCache(CoughnetError):
    """A forward cache does not belong to the given parameters."""


class ChecksumMismatch(CoughnetError):
    """A checkpoint payload does not match its recorded digest."""


class CacheFormatError(CoughnetError):
    """A feature cache file is truncated or has a bad header."""


class ManifestError(CoughnetError):
    """A manifest CSV is missing columns or has invalid rows."""


class ConfigError(CoughnetError):
    """A configuration value is invalid.

    The offending key is kept on ``key`` so callers can name it.
    """

    def __init__(self, key: str, message: str) -> None:
        super().__init__('{}: {}'.format(key, message))
        self.key = key
