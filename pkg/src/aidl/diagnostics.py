"""Diagnostics shared by the frontend, validator and CLI.

Codes are a frozen enumeration: external repair loops key on them, so an
existing code is never renumbered or reused.  New rules get new codes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class Code(str, Enum):
    SYNTAX = "E001"
    NAME_RESOLUTION = "E002"
    DUPLICATE_NAME = "E003"
    ILLEGAL_REFERENCE = "E004"
    SUBTREE_VIOLATION = "E005"
    UNKNOWN_CONSTRAINT = "E006"
    ARITY_OR_TYPE = "E007"
    DANGLING_REFERENCE = "E008"
    SELF_REFERENCE = "E009"
    DEFERRED_UNRESOLVABLE = "E010"
    CONSTRUCTOR = "E011"
    DOMAIN = "E012"
    IO = "E020"
    SOLVE_FAILED = "E030"
    BOOLEAN_DEGENERACY = "E040"
    OPEN_CHAIN = "W101"
    NOTE = "N001"


RULES = {
    Code.SYNTAX: "SyntaxError",
    Code.NAME_RESOLUTION: "NameResolution",
    Code.DUPLICATE_NAME: "DuplicateName",
    Code.ILLEGAL_REFERENCE: "IllegalReference",
    Code.SUBTREE_VIOLATION: "SubtreeViolation",
    Code.UNKNOWN_CONSTRAINT: "UnknownConstraint",
    Code.ARITY_OR_TYPE: "ArityOrType",
    Code.DANGLING_REFERENCE: "DanglingReference",
    Code.SELF_REFERENCE: "SelfReference",
    Code.DEFERRED_UNRESOLVABLE: "DeferredUnresolvable",
    Code.CONSTRUCTOR: "ConstructorArguments",
    Code.DOMAIN: "DomainError",
    Code.IO: "IOError",
    Code.SOLVE_FAILED: "SolveFailed",
    Code.BOOLEAN_DEGENERACY: "BooleanDegeneracy",
    Code.OPEN_CHAIN: "OpenChain",
    Code.NOTE: "Note",
}


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int
    end_col: int

    def merge(self, other: "Span") -> "Span":
        return Span(self.line, self.col, other.end_line, other.end_col)


@dataclass
class Diagnostic:
    code: Code
    message: str
    severity: str = "error"
    span: Optional[Span] = None
    path: str = ""
    file: str = ""
    suggestion: Optional[str] = None
    extra: dict = field(default_factory=dict)

    @property
    def rule(self) -> str:
        return RULES[self.code]

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def to_record(self) -> dict:
        s = self.span
        rec = {
            "code": self.code.value,
            "rule": self.rule,
            "severity": self.severity,
            "message": self.message,
            "file": self.file,
            "line": s.line if s else 0,
            "col": s.col if s else 0,
            "end_line": s.end_line if s else 0,
            "end_col": s.end_col if s else 0,
            "path": self.path,
        }
        if self.suggestion is not None:
            rec["suggestion"] = self.suggestion
        rec.update(self.extra)
        return rec

    def human(self) -> str:
        where = self.file or "<model>"
        if self.span:
            where += f":{self.span.line}:{self.span.col}"
        tail = f" (did you mean {self.suggestion!r}?)" if self.suggestion else ""
        at = f" [{self.path}]" if self.path else ""
        return f"{where}: {self.severity} {self.code.value} {self.rule}: {self.message}{tail}{at}"


class AidlError(Exception):
    """Base for errors that map onto a diagnostic code."""

    code = Code.SYNTAX

    def __init__(self, message: str, *, path: str = "", suggestion: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.path = path
        self.suggestion = suggestion

    def to_diagnostic(self, span: Optional[Span] = None, file: str = "") -> Diagnostic:
        return Diagnostic(self.code, self.message, span=span, path=self.path, file=file,
                          suggestion=self.suggestion)
