"""Exception types shared across the package.

The CLI maps these onto its exit-code contract, so new failure modes
should reuse one of the classes below rather than raising bare builtins.
"""


class NvmdtdError(Exception):
    """Base class for all package errors."""


class ParameterError(NvmdtdError, ValueError):
    """A channel, detector, or training parameter is out of its valid range."""


class UnsupportedModelError(NvmdtdError):
    """An analytic formula was asked to handle a noise model it does not cover."""


class NoRootError(NvmdtdError):
    """Root bracketing failed after the allowed number of expansions."""


class DivergenceError(NvmdtdError):
    """Training produced a non-finite loss."""


class FormatError(NvmdtdError):
    """A weight or dataset file is malformed, truncated, or version-mismatched."""


class ConfigError(NvmdtdError):
    """A run configuration failed validation."""


class MissingAssetError(NvmdtdError):
    """A required asset (typically a trained weight file) is absent."""
