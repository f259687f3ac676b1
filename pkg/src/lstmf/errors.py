"""Exceptions with fixed CLI exit codes so harnesses can assert failure modes."""


class PipelineError(Exception):
    exit_code = 1


class InputError(PipelineError):
    """Unreadable or malformed input sequence."""
    exit_code = 2


class ConfigError(PipelineError):
    """Invalid pipeline configuration."""
    exit_code = 3


class InsufficientDataError(PipelineError):
    """Not enough descriptors to fit the requested encoder."""
    exit_code = 4


class LengthMismatchError(PipelineError):
    """Requested trajectory lengths not covered by the encoder."""
    exit_code = 5


class ManifestError(PipelineError):
    """Manifest inconsistent with the representation files it references."""
    exit_code = 6
