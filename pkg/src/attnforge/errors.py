"""Exception types shared across the package."""


class AttnforgeError(Exception):
    """Base class for all package errors."""


class FormatError(AttnforgeError):
    """Container directory is missing required pieces or malformed."""


class CorruptError(AttnforgeError):
    """Container payload contradicts its manifest or violates invariants."""


class IoError(AttnforgeError):
    """Filesystem write failure."""


class MissingTimestepError(AttnforgeError):
    """Requested timestep is not recorded in the attention stack."""


class ConfigError(AttnforgeError):
    """Invalid configuration or inconsistent inputs."""


class ScoreMissingError(AttnforgeError):
    """A prompt record lacks the score required by the operation."""
