"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration, shapes, or experiment parameters.

    ``key`` names the offending config key when the error comes from config
    parsing.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class IngestionError(ValueError):
    """A dataset file could not be read. ``row`` is 1-based, header is row 1."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class NumericalError(FloatingPointError):
    """A loss or gradient became NaN or infinite."""


class PoolError(RuntimeError):
    """Violation of the labeled/unlabeled pool bookkeeping."""


class RoundAborted(RuntimeError):
    """An active-learning round failed; ``phase`` says where."""

    def __init__(self, round_index, phase, cause):
        super().__init__(f"round {round_index} aborted in phase '{phase}': {cause}")
        self.round_index = round_index
        self.phase = phase
        self.cause = cause
