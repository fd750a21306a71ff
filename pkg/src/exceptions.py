from __future__ import annotations

import uuid
from datetime import datetime, timezone
from typing import Any, Dict, Optional


# -------------------------------------------------
# Core: rich BwxError (problem-details compatible)
# -------------------------------------------------
class BwxError(Exception):
    """
    Codec error with structured fields and helpers to render
    a single-line message or a problem dict consistently.
    """

    exit_code: int = 1

    def __init__(
        self,
        detail: str = "",
        *,
        code: Optional[str] = None,      # machine-friendly error code (e.g. "file/format")
        errors: Any = None,                  # field-level errors, validation issues, etc.
        extra: Optional[Dict[str, Any]] = None,  # any additional context (paths, sizes)
        instance: Optional[str] = None,      # unique id for this occurrence
    ) -> None:
        super().__init__(detail)
        self.detail = detail
        self.code = code
        self.errors = errors
        self.extra = extra or {}
        self.instance = instance or f"urn:uuid:{uuid.uuid4()}"
        self.timestamp = datetime.now(timezone.utc).isoformat()

    def to_problem(self) -> Dict[str, Any]:
        body: Dict[str, Any] = {
            "title": self.extra.get("title", self.__class__.__name__),
            "exit_code": self.exit_code,
            "detail": self.detail,
            "instance": self.instance,
            "timestamp": self.timestamp,
        }
        if self.code:
            body["code"] = self.code
        if self.errors is not None:
            body["errors"] = self.errors
        if self.extra:
            # keep extra last to avoid collisions with reserved keys
            body["extra"] = self.extra
        return body

    def to_line(self) -> str:
        """Single-line, machine-parsable rendering for stderr."""
        detail = " ".join(str(self.detail).split())
        return f"error code={self.code or 'unknown'} detail={detail}"

    @classmethod
    def from_unexpected(cls, exc: Exception) -> "BwxError":
        """Factory to wrap unknown exceptions safely."""
        return InternalError(extra={"cause": exc.__class__.__name__})


# -------------------------------------------------
# Typed Exceptions
# -------------------------------------------------

class PreconditionError(BwxError):
    def __init__(self, detail: str = "Precondition violated", **kw):
        kw.setdefault("code", "input/precondition")
        super().__init__(detail, **kw)

class FormatError(BwxError):
    def __init__(self, detail: str = "Unsupported or corrupt file", **kw):
        kw.setdefault("code", "file/format")
        super().__init__(detail, **kw)

class UnsupportedVersionError(FormatError):
    def __init__(self, detail: str = "Unsupported format version", **kw):
        super().__init__(detail, code="file/version", **kw)

class AudioIOError(BwxError):
    def __init__(self, detail: str = "I/O failure", **kw):
        super().__init__(detail, code="file/io", **kw)

class DegenerateInputError(BwxError):
    def __init__(self, detail: str = "Degenerate input", **kw):
        super().__init__(detail, code="numeric/degenerate", **kw)

class StabilityError(BwxError):
    def __init__(self, detail: str = "Unstable synthesis model", **kw):
        super().__init__(detail, code="numeric/unstable", **kw)

class CodebookError(BwxError):
    def __init__(self, detail: str = "codebook hash mismatch", **kw):
        super().__init__(detail, code="codec/codebook_mismatch", **kw)

class StreamError(BwxError):
    def __init__(self, detail: str = "Inconsistent stream", **kw):
        super().__init__(detail, code="codec/stream", **kw)

class IndexRangeError(BwxError):
    def __init__(self, detail: str = "Index out of range", **kw):
        super().__init__(detail, code="codec/index", **kw)

class UndefinedSnrError(PreconditionError):
    def __init__(self, detail: str = "Reference has zero energy in band", **kw):
        super().__init__(detail, code="eval/undefined_snr", **kw)

class UsageError(BwxError):
    exit_code = 2

    def __init__(self, detail: str = "Invalid usage", **kw):
        super().__init__(detail, code="cli/usage", **kw)

class InternalError(BwxError):
    def __init__(self, detail: str = "Internal error", **kw):
        super().__init__(detail, code="internal/unexpected", **kw)
