"""Exception hierarchy shared by the simulator modules."""


class BufsimError(Exception):
    """Base class for all simulator errors."""


class InvalidParameterError(BufsimError, ValueError):
    pass


class InvalidStateError(BufsimError):
    pass


class TraceParseError(BufsimError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class TraceValidationError(BufsimError, ValueError):
    pass


class PinUnderflowError(InvalidStateError):
    pass


class NoVictimError(BufsimError):
    """Every slot is pinned, so no victim can be chosen."""


class PolicyContractError(BufsimError):
    """A policy returned a slot that may not be evicted."""

    def __init__(self, message: str, seq: int | None = None):
        if seq is not None:
            message = f"request {seq}: {message}"
        super().__init__(message)
        self.seq = seq


class ConfigError(BufsimError, ValueError):
    pass
