"""Recursive-descent parser for the ``.pv`` subset.

Syntax errors carry a structured trace (line, column, expected tokens and
the offending lexeme) that the repair loop feeds back to the generator.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import VerifiableError
from .ast import (
    App, Decl, DeclKind, Event, Ident, IfEq, In, LetDestructor, Loc, New, Nil, Out,
    Parallel, PiModel, QueryKind, QuerySpec, Replicate, Rewrite,
)

KEYWORDS = frozenset({
    "type", "free", "fun", "reduc", "forall", "event", "query", "process", "new", "out",
    "in", "let", "if", "then", "else", "private", "attacker",
})

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<pragma>\(\*@.*?\*\))
  | (?P<comment>\(\*.*?\*\))
  | (?P<arrow>==>)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<zero>0)
  | (?P<punct>[(),;:.=|!\[\]])
""", re.S | re.X)


@dataclass(frozen=True)
class Token:
    kind: str     # ident, kw, punct, arrow, zero, pragma, eof
    value: str
    loc: Loc


@dataclass
class ErrorTrace:
    line: int
    column: int
    expected: list[str]
    lexeme: str
    message: str = ""

    def describe(self) -> str:
        exp = " or ".join(repr(e) for e in self.expected) if self.expected else "?"
        return f"{self.message or 'syntax error'}: expected {exp}, got {self.lexeme!r}"

    def __str__(self):
        return f"{self.line}:{self.column}: {self.describe()}"

    def as_dict(self) -> dict:
        return {"line": self.line, "column": self.column, "expected": list(self.expected),
                "lexeme": self.lexeme, "message": self.message}


class PvError(VerifiableError):
    """Base for errors raised while reading a model."""
    code = "E_SYNTAX"


class PvSyntaxError(PvError):
    code = "E_SYNTAX"

    def __init__(self, trace: ErrorTrace):
        super().__init__(str(trace))
        self.trace = trace


class UndeclaredIdentifier(PvError):
    code = "E_UNDECLARED"

    def __init__(self, name: str, loc: Loc | None = None):
        super().__init__(f"undeclared identifier {name!r}" + (f" at {loc}" if loc else ""))
        self.name = name
        self.loc = loc


class ArityMismatch(PvError):
    code = "E_ARITY"

    def __init__(self, name: str, expected: int, got: int, loc: Loc | None = None):
        super().__init__(f"{name!r} expects {expected} argument(s), got {got}")
        self.name = name
        self.expected = expected
        self.got = got
        self.loc = loc


class ModelInvalid(PvError):
    """Validation failed with a diagnostic that has no dedicated exception."""

    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = list(diagnostics)
        self.code = self.diagnostics[0].code if self.diagnostics else "E_INVALID"


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise PvSyntaxError(ErrorTrace(line, col, [], text[pos], "unexpected character"))
        kind = m.lastgroup
        value = m.group()
        if kind == "ident" and value in KEYWORDS:
            kind = "kw"
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, value, Loc(line, col)))
        nl = value.count("\n")
        if nl:
            line += nl
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    if text.count("(*") > text.count("*)"):
        raise PvSyntaxError(ErrorTrace(line, col, ["*)"], "<eof>", "unterminated comment"))
    tokens.append(Token("eof", "<eof>", Loc(line, col)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        # optional tokens the grammar would also have taken at a position
        self.alts: dict[int, list[str]] = {}

    # -- helpers ------------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, value: str) -> bool:
        t = self.tok
        return t.value == value and t.kind in ("kw", "punct", "arrow", "zero")

    def fail(self, expected, message=""):
        t = self.tok
        expected = list(dict.fromkeys(self.alts.get(self.i, []) + list(expected)))
        raise PvSyntaxError(ErrorTrace(t.loc.line, t.loc.column, expected, t.value, message))

    def could(self, value: str) -> bool:
        """Like :meth:`accept`, but remember the miss for error messages."""
        if self.accept(value):
            return True
        self.alts.setdefault(self.i, []).append(value)
        return False

    def expect(self, value: str) -> Token:
        if not self.at(value):
            self.fail([value])
        t = self.tok
        self.i += 1
        return t

    def accept(self, value: str) -> bool:
        if self.at(value):
            self.i += 1
            return True
        return False

    def ident(self, what="identifier") -> Token:
        t = self.tok
        if t.kind != "ident":
            self.fail([what])
        self.i += 1
        return t

    # -- top level ----------------------------------------------------------
    def model(self) -> PiModel:
        decls: list[Decl] = []
        queries: list[QuerySpec] = []
        while not self.at("process"):
            t = self.tok
            if t.kind == "eof":
                self.fail(["process"], "missing process section")
            if t.kind == "pragma":
                queries.append(self.pragma())
            elif self.at("query"):
                queries.append(self.query())
            elif t.value in ("type", "free", "fun", "reduc", "event") and t.kind == "kw":
                decls.extend(self.decl())
            else:
                self.fail(["type", "free", "fun", "reduc", "event", "query", "process"])
        self.expect("process")
        proc = self.process()
        if self.tok.kind != "eof":
            self.fail(["<eof>", "|"])
        return PiModel(tuple(decls), proc, tuple(queries))

    def decl(self) -> list[Decl]:
        start = self.tok
        kw = start.value
        self.i += 1
        if kw == "type":
            name = self.ident("type name")
            self.expect(".")
            return [Decl(DeclKind.TYPE, name.value, loc=name.loc)]
        if kw == "free":
            names = [self.ident("name")]
            while self.accept(","):
                names.append(self.ident("name"))
            self.expect(":")
            typ = self.ident("type").value
            private = False
            if self.accept("["):
                self.expect("private")
                self.expect("]")
                private = True
            self.expect(".")
            if private:
                kind = DeclKind.PRIVATE_FREE_NAME
            else:
                kind = DeclKind.CHANNEL if typ == "channel" else DeclKind.FREE_NAME
            return [Decl(kind, n.value, (typ,), loc=n.loc) for n in names]
        if kw == "fun":
            name = self.ident("function name")
            args = self.type_list()
            self.expect(":")
            res = self.ident("type").value
            self.expect(".")
            return [Decl(DeclKind.CONSTRUCTOR, name.value, tuple(args), res, loc=name.loc)]
        if kw == "reduc":
            self.expect("forall")
            binders = self.binders()
            self.expect(";")
            head = self.ident("destructor name")
            self.expect("(")
            lhs = self.terms(")")
            self.expect(")")
            self.expect("=")
            rhs = self.term()
            self.expect(".")
            return [Decl(DeclKind.DESTRUCTOR, head.value, (), None,
                         Rewrite(tuple(binders), tuple(lhs), rhs), loc=head.loc)]
        # event
        name = self.ident("event name")
        args = self.type_list() if self.at("(") else []
        self.expect(".")
        return [Decl(DeclKind.EVENT, name.value, tuple(args), loc=name.loc)]

    def type_list(self) -> list[str]:
        self.expect("(")
        out = []
        if not self.at(")"):
            out.append(self.ident("type").value)
            while self.accept(","):
                out.append(self.ident("type").value)
        self.expect(")")
        return out

    def binders(self) -> list[tuple[str, str]]:
        out = []
        while True:
            v = self.ident("variable").value
            self.expect(":")
            out.append((v, self.ident("type").value))
            if not self.accept(","):
                return out

    def query(self) -> QuerySpec:
        start = self.expect("query")
        binders: list[tuple[str, str]] = []
        if self.tok.kind == "ident":
            binders = self.binders()
            self.expect(";")
        if self.accept("attacker"):
            self.expect("(")
            target = self.ident("name")
            self.expect(")")
            self.expect(".")
            return QuerySpec(QueryKind.SECRECY, target=target.value, binders=tuple(binders), loc=target.loc)
        if self.at("event"):
            end, end_args = self.event_atom()
            self.expect("==>")
            begin, begin_args = self.event_atom()
            self.expect(".")
            return QuerySpec(QueryKind.CORRESPONDENCE, binders=tuple(binders), end_event=end,
                             end_args=end_args, begin_event=begin, begin_args=begin_args,
                             loc=start.loc)
        self.fail(["attacker", "event"])

    def event_atom(self) -> tuple[str, tuple[str, ...]]:
        self.expect("event")
        self.expect("(")
        name = self.ident("event name").value
        args = []
        if self.accept("("):
            if not self.at(")"):
                args.append(self.ident("variable").value)
                while self.accept(","):
                    args.append(self.ident("variable").value)
            self.expect(")")
        self.expect(")")
        return name, tuple(args)

    def pragma(self) -> QuerySpec:
        t = self.tok
        self.i += 1
        body = t.value[3:-2].strip()
        m = re.fullmatch(r"fresh\s*\(\s*([A-Za-z_][\w']*)\s*\)(?:\s+using\s+([A-Za-z_][\w']*))?\.?", body)
        if not m:
            raise PvSyntaxError(ErrorTrace(t.loc.line, t.loc.column,
                                           ["fresh(<event>) [using <nonce>]"], body, "bad pragma"))
        return QuerySpec(QueryKind.FRESHNESS, accept_event=m.group(1), nonce=m.group(2), loc=t.loc)

    # -- terms --------------------------------------------------------------
    def term(self):
        t = self.ident("term")
        if self.accept("("):
            args = self.terms(")")
            self.expect(")")
            return App(t.value, tuple(args), loc=t.loc)
        return Ident(t.value, loc=t.loc)

    def terms(self, closer: str) -> list:
        if self.at(closer):
            return []
        out = [self.term()]
        while self.accept(","):
            out.append(self.term())
        return out

    # -- processes ----------------------------------------------------------
    def process(self):
        left = self.seq()
        while True:
            loc = self.tok.loc
            if not self.could("|"):
                return left
            left = Parallel(left, self.seq(), loc=loc)

    def cont(self):
        return self.seq() if self.could(";") else Nil()

    def seq(self):
        t = self.tok
        loc = t.loc
        if t.kind == "zero":
            self.i += 1
            return Nil(loc=loc)
        if self.accept("("):
            p = self.process()
            self.expect(")")
            return p
        if self.accept("!"):
            return Replicate(self.seq(), loc=loc)
        if self.accept("new"):
            name = self.ident("name").value
            self.expect(":")
            typ = self.ident("type").value
            return New(name, typ, self.cont(), loc=loc)
        if self.accept("out"):
            self.expect("(")
            ch = self.term()
            self.expect(",")
            msg = self.term()
            self.expect(")")
            return Out(ch, msg, self.cont(), loc=loc)
        if self.accept("in"):
            self.expect("(")
            ch = self.term()
            self.expect(",")
            var = self.ident("variable").value
            self.expect(":")
            typ = self.ident("type").value
            self.expect(")")
            return In(ch, var, typ, self.cont(), loc=loc)
        if self.accept("event"):
            name = self.ident("event name").value
            args = []
            if self.accept("("):
                args = self.terms(")")
                self.expect(")")
            return Event(name, tuple(args), self.cont(), loc=loc)
        if self.accept("let"):
            var = self.ident("variable").value
            if self.accept(":"):
                self.ident("type")
            self.expect("=")
            term = self.term()
            self.expect("in")
            body = self.seq()
            other = self.seq() if self.accept("else") else None
            return LetDestructor(var, term, body, other, loc=loc)
        if self.accept("if"):
            left = self.term()
            self.expect("=")
            right = self.term()
            self.expect("then")
            then = self.seq()
            other = self.seq() if self.accept("else") else Nil()
            return IfEq(left, right, then, other, loc=loc)
        self.fail(["0", "(", "!", "new", "out", "in", "event", "let", "if"])


def parse_syntax(source_text: str) -> PiModel:
    """Parse without semantic checks. Raises :class:`PvSyntaxError`."""
    return _Parser(source_text).model()


def parse_model(source_text: str) -> PiModel:
    """Parse and validate; the first blocking diagnostic is raised as an exception."""
    from .validate import validate

    model = parse_syntax(source_text)
    diags = validate(model)
    if diags:
        first = diags[0]
        if first.code in ("E_UNDECLARED", "E_UNKNOWN_TYPE"):
            raise UndeclaredIdentifier(first.subject, first.loc)
        if first.code == "E_ARITY":
            raise ArityMismatch(first.subject, first.expected_arity, first.got_arity, first.loc)
        raise ModelInvalid(diags)
    return model
