"""Exception hierarchy shared across the package."""

from __future__ import annotations


class FotError(Exception):
    """Base class for all package errors."""


class UnknownOperationError(FotError):
    """An operation id does not exist (or is removed) in the graph."""


class OpNotRunningError(FotError):
    """The acting operation is not in the ``running`` state."""


class ReadOnlyGraphError(FotError):
    """Attempted to mutate a read-only graph view."""


class ValidationFailedError(FotError):
    """A mutation batch was rejected; carries the violation list."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{v.rule}: {v.message}" for v in self.violations)
        super().__init__(f"mutation rejected ({lines})")


class MissingPortOutputError(FotError):
    """record_outputs was called without a thought for a connected port."""


class GraphParseError(FotError):
    """Serialized graph bytes could not be parsed."""


class MalformedInputError(FotError):
    """An operation received inputs it cannot interpret."""


class ConfigError(FotError):
    """Invalid configuration (bad hyperparameters, bad CLI arguments)."""


class BackendError(FotError):
    """A thought-generator backend call failed."""

    retryable = False


class MockScriptMissError(BackendError):
    """The scripted mock has no entry for a request."""


class ReplayMissError(BackendError):
    """The replay log has no recorded response for a request."""


class HttpBackendError(BackendError):
    retryable = True

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class BudgetExceededError(FotError):
    """The configured cost ceiling for a run was exceeded."""


class DeadlockError(FotError):
    """No operation is ready or running but planned operations remain."""

    def __init__(self, stuck_ops):
        self.stuck_ops = sorted(stuck_ops)
        super().__init__(f"deadlock: planned ops cannot become ready: {self.stuck_ops}")


class OpFailedError(FotError):
    """An operation raised during execution (fail_fast policy)."""

    def __init__(self, op_id: str, cause: BaseException):
        self.op_id = op_id
        self.cause = cause
        super().__init__(f"operation {op_id} failed: {cause}")
