"""Exception types shared across the package."""

from __future__ import annotations


class CoverAssertError(Exception):
    """Base class for all errors raised by this package."""


class EmptyInput(CoverAssertError):
    pass


class UnparsableSource(CoverAssertError):
    """A source file cannot be segmented into the supported node hierarchy."""

    def __init__(self, file_id: str, offset: int, reason: str = ""):
        self.file_id = file_id
        self.offset = offset
        msg = f"{file_id}: unparsable at byte {offset}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class DuplicateId(CoverAssertError):
    def __init__(self, dup_id: str):
        self.dup_id = dup_id
        super().__init__(f"duplicate id: {dup_id!r}")


class ProviderUnavailable(CoverAssertError):
    """The live provider endpoint failed after the retry budget was exhausted."""


class DimensionMismatch(CoverAssertError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"embedding width {got} != configured {expected}")


class MalformedProviderReply(CoverAssertError):
    pass


class SchemaViolation(CoverAssertError):
    """Structured input violates its schema; carries a JSON-pointer location."""

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}")


class SingleCluster(CoverAssertError):
    pass


class GeneratorFailure(CoverAssertError):
    def __init__(self, iteration: int, reason: str):
        self.iteration = iteration
        super().__init__(f"generator failed at iteration {iteration}: {reason}")


class AdapterNotFound(CoverAssertError):
    pass


class MissingArtifacts(CoverAssertError):
    pass


class PipelineError(CoverAssertError):
    """Wraps a module error with the feedback-loop iteration it occurred in."""

    def __init__(self, iteration: int, cause: Exception):
        self.iteration = iteration
        super().__init__(f"iteration {iteration}: {cause}")


class LockHeld(CoverAssertError):
    pass
