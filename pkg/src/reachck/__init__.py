"""reachck: reachability qualifiers with cyclic references.

A qualifier-algebra library, an algorithmic type checker with cyclic
references, shallow reference tracking, and dual-component escaping
references, a call-by-value evaluator with a mutable store, and a
metatheory harness that dynamically validates progress, preservation,
and separation.
"""

from .errors import ErrorKind, ParseError, Span, TypeCheckError
from .syntax import (FRESH, Qualifier, QualifiedType, Term, Type)

__all__ = [
    "ErrorKind", "ParseError", "Span", "TypeCheckError",
    "FRESH", "Qualifier", "QualifiedType", "Term", "Type",
]

__version__ = "0.1.0"
