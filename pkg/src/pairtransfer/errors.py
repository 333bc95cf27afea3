"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class PairTransferError(Exception):
    exit_code = 1


class ConfigError(PairTransferError, ValueError):
    exit_code = 2


class IngestionError(PairTransferError, OSError):
    exit_code = 3


class PairingError(PairTransferError, ValueError):
    """Domains disagree on N, K, T or label alignment."""

    exit_code = 3


class SplitError(PairTransferError, ValueError):
    exit_code = 2


class NumericError(PairTransferError, ArithmeticError):
    exit_code = 4


class InsufficientDataError(PairTransferError, ValueError):
    exit_code = 4


class DegenerateSimilarityError(PairTransferError, ValueError):
    """Every source domain has (numerically) zero distance to the target."""

    exit_code = 5
