"""Exception hierarchy shared by every module."""


class StaleSGError(Exception):
    """Base class for all package errors."""


class ConfigError(StaleSGError, ValueError):
    pass


class InvalidMinibatchError(StaleSGError, ValueError):
    pass


class ModelMismatchError(StaleSGError, ValueError):
    pass


class UnsupportedOracleError(StaleSGError, TypeError):
    pass


class UnsupportedDimensionError(StaleSGError, ValueError):
    pass


class LibsvmParseError(StaleSGError, ValueError):
    def __init__(self, path, line_no, message):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class UnsupportedLabelError(LibsvmParseError):
    pass


class StateKindError(StaleSGError, TypeError):
    pass


class PolicyViolationError(StaleSGError, RuntimeError):
    pass


class EmptyTraceError(StaleSGError, ValueError):
    pass


class EmptyAverageError(StaleSGError, ValueError):
    pass


class InsufficientReplicatesError(StaleSGError, ValueError):
    pass


class EmptyAggregateError(StaleSGError, ValueError):
    pass


class TargetUnreachableError(StaleSGError, ValueError):
    def __init__(self, workers, target):
        self.workers = workers
        self.target = target
        super().__init__(f"curve for W={workers} never reaches target {target!r}")
