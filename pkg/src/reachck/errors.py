"""Error types shared across the checker, parser, and CLI."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


@dataclass(frozen=True)
class Span:
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __str__(self):
        return f"{self.start_line}:{self.start_col}-{self.end_line}:{self.end_col}"


class ErrorKind(Enum):
    UNBOUND_VARIABLE = "UnboundVariable"
    UNOBSERVABLE = "Unobservable"
    FRESH_REFERENT = "FreshReferent"
    REFERENT_MISMATCH = "ReferentMismatch"
    CYCLIC_ASSIGNEE_NOT_VARIABLE = "CyclicAssigneeNotVariable"
    CYCLIC_QUALIFIER_NOT_SINGLETON = "CyclicQualifierNotSingleton"
    SEPARATION_VIOLATION = "SeparationViolation"
    DEPENDENT_RETURN_ESCAPE = "DependentReturnEscape"
    NOT_A_FUNCTION = "NotAFunction"
    NOT_A_REFERENCE = "NotAReference"
    SUBTYPE_FAILURE = "SubtypeFailure"
    WRITE_FORBIDDEN = "WriteForbidden"
    OBSERVATION_ESCAPE = "ObservationEscape"
    ANNOTATION_REQUIRED = "AnnotationRequired"
    BOUND_VIOLATION = "BoundViolation"


class TypeCheckError(Exception):
    """A rejection of a term, carrying exactly one primary kind."""

    def __init__(self, kind: ErrorKind, message: str, span: Span | None = None,
                 expected=None, actual=None, missing: frozenset = frozenset()):
        super().__init__(message)
        self.kind = kind
        self.message = message
        self.span = span
        self.expected = expected
        self.actual = actual
        # observability failures name the atoms the filter lacked, so
        # abstraction-qualifier inference can widen capture sets
        self.missing = missing

    def __str__(self):
        loc = f" at {self.span}" if self.span else ""
        return f"{self.kind.value}{loc}: {self.message}"


class ParseError(Exception):
    def __init__(self, message: str, span: Span | None = None, expected: tuple[str, ...] = ()):
        super().__init__(message)
        self.message = message
        self.span = span
        self.expected = expected

    def __str__(self):
        loc = f" at {self.span}" if self.span else ""
        return f"ParseError{loc}: {self.message}"
