"""Exception hierarchy and CLI exit-code mapping."""

from __future__ import annotations


class LoadcastError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(LoadcastError):
    """Invalid input data or arguments (precondition violated)."""


class ConfigError(ValidationError):
    """Config file missing, unparseable, or contradictory."""


class NotFoundError(LoadcastError):
    """Unknown point id or model version. Distinct from corruption."""


class IntegrityError(LoadcastError):
    """Stored payload failed checksum or structural verification."""


class ProtocolError(LoadcastError):
    """Upstream gateway returned a malformed or error grid."""


class TransportError(LoadcastError):
    """Network failure that persisted through all retries."""


class StoreError(LoadcastError):
    """Backing storage unavailable or failed mid-operation."""


class DivergenceError(LoadcastError):
    """Training loss became NaN or infinite."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")


# Exit codes: 0 success, 1 validation, 2 runtime, 3 divergence.
def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, DivergenceError):
        return 3
    if isinstance(exc, ValidationError):
        return 1
    if isinstance(exc, LoadcastError):
        return 2
    return 2
