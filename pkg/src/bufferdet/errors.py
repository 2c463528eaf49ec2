"""Exception hierarchy.

Every error raised on bad input derives from ``ValidationError`` so the CLI
can map it onto a single exit code.
"""


class BufferDetError(Exception):
    """Base class for all package errors."""


class ValidationError(BufferDetError, ValueError):
    pass


class MalformedDocument(ValidationError):
    pass


class SchemaViolation(ValidationError):
    pass


class InvariantViolation(ValidationError):
    pass


class MalformedRow(ValidationError):
    pass


class NonNormalizedRow(ValidationError):
    pass


class NonMonotoneFrames(ValidationError):
    pass


class FrameOutOfRange(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class InsufficientExamples(ValidationError):
    pass


class NonMonotonePush(ValidationError):
    pass


class TaskMismatch(ValidationError):
    pass


class UnknownVideo(ValidationError):
    pass


class UnknownClass(ValidationError):
    pass


class PayloadGap(ValidationError):
    pass


class ScorerFailure(BufferDetError):
    """Raised when a scorer raises; carries the target frame."""

    def __init__(self, frame: int, video_id: str, cause: BaseException):
        super().__init__(f"scorer failed for video {video_id!r} at frame {frame}: {cause!r}")
        self.frame = frame
        self.video_id = video_id
        self.__cause__ = cause
