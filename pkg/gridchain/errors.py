"""
Exception hierarchy shared by every gridchain component
"""


class GridchainError(Exception):
    """Root of all gridchain errors"""


class InvalidSeedError(GridchainError, ValueError):
    """Account seed is not exactly 32 bytes"""


class KeyMismatchError(GridchainError, ValueError):
    """Signing key does not belong to the transaction sender"""


class DecodeError(GridchainError, ValueError):
    """Bytes do not follow the canonical encoding"""


class FramingError(DecodeError):
    """Ledger file frame is truncated or malformed"""

    def __init__(self, message: str, height: int) -> None:
        super().__init__(message)
        self.height = height


class ScheduleError(GridchainError):
    """Authority is not the scheduled validator for the height"""


class ReplayError(GridchainError):
    """A chain failed validation during replay"""

    def __init__(self, height: int, reason: str) -> None:
        super().__init__(f"block {height} rejected: {reason}")
        self.height = height
        self.reason = reason


class ContractError(GridchainError):
    """A contract method refused a transaction"""


class OracleServiceError(GridchainError):
    """An oracle service could not produce a result"""


class InsufficientHistoryError(OracleServiceError):
    """Not enough history to forecast or to build a baseline"""


class TraceFormatError(GridchainError, ValueError):
    """Energy trace file is malformed"""


class ConfigError(GridchainError, ValueError):
    """Scenario configuration is invalid"""
