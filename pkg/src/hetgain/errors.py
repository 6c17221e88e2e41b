"""Exception types shared across the package.

The CLI maps these onto process exit codes, so new error conditions should
reuse one of the classes below rather than raising bare ValueErrors.
"""


class HetgainError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(HetgainError):
    """Malformed run configuration (unknown key, bad value, parse failure)."""

    exit_code = 2


class SizeGuardError(HetgainError):
    """An enumeration would exceed its configured size guard."""

    exit_code = 3


class DomainError(HetgainError):
    """Numerical-domain violation (invalid parameter, inadmissible input)."""

    exit_code = 4
