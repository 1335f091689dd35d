"""The restricted applied pi-calculus: AST, parser, validator, renderer."""

from .ast import (
    App, Decl, DeclKind, Event, Ident, IfEq, In, LetDestructor, Loc, New, Nil, Out, Parallel,
    PiModel, Process, QueryKind, QuerySpec, Replicate, Rewrite, Term, process_size, subprocesses,
)
from .parser import (
    ArityMismatch, ErrorTrace, ModelInvalid, PvError, PvSyntaxError, UndeclaredIdentifier,
    parse_model, parse_syntax, tokenize,
)
from .queries import ALL_FEATURES, MissingQueryTarget, inject_available, inject_queries
from .render import render, render_term
from .validate import CODES, Diagnostic, diagnose, validate

__all__ = [
    "App", "ArityMismatch", "ALL_FEATURES", "CODES", "Decl", "DeclKind", "Diagnostic", "ErrorTrace",
    "Event", "Ident", "IfEq", "In", "LetDestructor", "Loc", "MissingQueryTarget", "ModelInvalid",
    "New", "Nil", "Out", "Parallel", "PiModel", "Process", "PvError", "PvSyntaxError", "QueryKind",
    "QuerySpec", "Replicate", "Rewrite", "Term", "UndeclaredIdentifier", "diagnose",
    "inject_available", "inject_queries", "parse_model", "parse_syntax", "process_size", "render",
    "render_term", "subprocesses", "tokenize", "validate",
]
