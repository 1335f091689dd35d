"""Static checks on parsed models.

Every problem is reported as a :class:`Diagnostic` with a stable code; the
codes double as retrieval keys for the error-recovery knowledge base.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ast import (
    App, Decl, DeclKind, Event, Ident, IfEq, In, LetDestructor, Loc, NOLOC, New, Nil, Out,
    Parallel, PiModel, QueryKind, Replicate, subprocesses, term_idents,
)

BUILTIN_TYPES = frozenset({"bitstring", "channel", "bool"})

CODES = {
    "E_SYNTAX": "the text does not match the grammar",
    "E_UNDECLARED": "identifier used but never declared",
    "E_UNKNOWN_TYPE": "type name neither built in nor declared",
    "E_ARITY": "function or event applied to the wrong number of arguments",
    "E_DUPLICATE_DECL": "name declared twice",
    "E_MISSING_ELSE": "destructor let without an else branch",
    "E_TYPE_MISMATCH": "argument or comparison types disagree",
    "E_NOT_CHANNEL": "in/out on a term that is not a channel",
    "E_DESTRUCTOR_RULE": "malformed rewrite rule",
    "E_QUERY_UNDECLARED_EVENT": "query mentions an undeclared event",
    "E_QUERY_ARITY": "correspondence events have different arities",
    "E_UNBOUND_QUERY_VAR": "query variable not bound by the query or the end event",
    "E_FRESH_NOT_NEW": "freshness nonce is not created by any new",
}


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    loc: Loc = NOLOC
    subject: str = ""
    expected_arity: int = -1
    got_arity: int = -1
    expected: tuple[str, ...] = field(default=())

    def __str__(self):
        return f"[{self.code}] {self.loc}: {self.message}"

    def as_dict(self) -> dict:
        d = {"code": self.code, "message": self.message, "line": self.loc.line,
             "column": self.loc.column, "subject": self.subject}
        if self.expected:
            d["expected"] = list(self.expected)
        return d


class _Checker:
    def __init__(self, model: PiModel):
        self.model = model
        self.diags: list[Diagnostic] = []
        self.types: set[str] = set(BUILTIN_TYPES)
        self.names: dict[str, Decl] = {}      # free names, constructors, destructors
        self.events: dict[str, Decl] = {}

    def report(self, code, message, loc=NOLOC, subject="", **kw):
        d = Diagnostic(code, message, loc or NOLOC, subject, **kw)
        if d not in self.diags:
            self.diags.append(d)

    def clash(self, a: str | None, b: str | None) -> bool:
        # an unknown type is already reported once; don't cascade it into mismatches
        return bool(a and b and a != b and a in self.types and b in self.types)

    def need_type(self, typ: str, loc: Loc):
        if typ not in self.types:
            self.report("E_UNKNOWN_TYPE", f"unknown type {typ!r}", loc, typ)

    # -- declarations ---------------------------------------------------------
    def declarations(self):
        for d in self.model.declarations:
            if d.kind is DeclKind.TYPE:
                if d.name in self.types:
                    self.report("E_DUPLICATE_DECL", f"type {d.name!r} declared twice", d.loc, d.name)
                self.types.add(d.name)
                continue
            table = self.events if d.kind is DeclKind.EVENT else self.names
            if d.name in table:
                self.report("E_DUPLICATE_DECL", f"{d.name!r} declared twice", d.loc, d.name)
                continue
            for t in d.signature:
                self.need_type(t, d.loc)
            if d.result:
                self.need_type(d.result, d.loc)
            if d.kind is DeclKind.DESTRUCTOR:
                self.rule(d)
            table[d.name] = d

    def rule(self, d: Decl):
        rule = d.rule
        env = {}
        for v, t in rule.variables:
            self.need_type(t, d.loc)
            env[v] = t
        lhs_vars = set()
        for arg in rule.lhs:
            self.term(arg, env, pattern=True)
            lhs_vars |= {i.name for i in term_idents(arg) if i.name in env}
        rhs_vars = {i.name for i in term_idents(rule.rhs) if i.name in env}
        if not rhs_vars <= lhs_vars:
            self.report("E_DESTRUCTOR_RULE",
                        f"right-hand side of {d.name!r} uses variables absent from the left",
                        d.loc, d.name)
        self.term(rule.rhs, env, pattern=True)

    # -- terms ----------------------------------------------------------------
    def result_type(self, decl: Decl) -> str | None:
        if decl.kind is DeclKind.CONSTRUCTOR:
            return decl.result
        if decl.kind is DeclKind.DESTRUCTOR and decl.rule is not None:
            rhs = decl.rule.rhs
            env = dict(decl.rule.variables)
            if isinstance(rhs, Ident):
                return env.get(rhs.name)
            f = self.names.get(rhs.fn)
            return f.result if f is not None and f.kind is DeclKind.CONSTRUCTOR else None
        return None

    def arg_types(self, decl: Decl) -> tuple[str | None, ...]:
        if decl.kind is DeclKind.CONSTRUCTOR:
            return decl.signature
        env = dict(decl.rule.variables)
        out = []
        for a in decl.rule.lhs:
            if isinstance(a, Ident):
                out.append(env.get(a.name))
            else:
                f = self.names.get(a.fn)
                out.append(f.result if f is not None and f.kind is DeclKind.CONSTRUCTOR else None)
        return tuple(out)

    def term(self, t, env: dict[str, str], pattern=False) -> str | None:
        if isinstance(t, Ident):
            if t.name in env:
                return env[t.name]
            d = self.names.get(t.name)
            if d is None or not d.is_name:
                if d is not None and d.kind is DeclKind.CONSTRUCTOR and d.arity == 0:
                    return d.result
                self.report("E_UNDECLARED", f"undeclared identifier {t.name!r}", t.loc, t.name)
                return None
            return d.type_name
        d = self.names.get(t.fn)
        if d is None or d.is_name or (pattern and d.kind is DeclKind.DESTRUCTOR):
            if d is None or d.is_name:
                self.report("E_UNDECLARED", f"undeclared function {t.fn!r}", t.loc, t.fn)
            else:
                self.report("E_DESTRUCTOR_RULE", f"destructor {t.fn!r} inside a rewrite rule", t.loc, t.fn)
            for a in t.args:
                self.term(a, env, pattern)
            return None
        if len(t.args) != d.arity:
            self.report("E_ARITY", f"{t.fn!r} expects {d.arity} argument(s), got {len(t.args)}",
                        t.loc, t.fn, expected_arity=d.arity, got_arity=len(t.args))
            for a in t.args:
                self.term(a, env, pattern)
            return self.result_type(d)
        for a, want in zip(t.args, self.arg_types(d)):
            got = self.term(a, env, pattern)
            if self.clash(got, want):
                self.report("E_TYPE_MISMATCH", f"argument of {t.fn!r} has type {got}, expected {want}",
                            getattr(a, "loc", t.loc), t.fn, expected=(want,))
        return self.result_type(d)

    # -- processes ------------------------------------------------------------
    def process(self, p, env: dict[str, str]):
        while True:
            if isinstance(p, Nil):
                return
            if isinstance(p, New):
                self.need_type(p.type, p.loc)
                env = {**env, p.name: p.type}
                p = p.cont
            elif isinstance(p, Out):
                self.channel(p.channel, env)
                self.term(p.term, env)
                p = p.cont
            elif isinstance(p, In):
                self.channel(p.channel, env)
                self.need_type(p.type, p.loc)
                env = {**env, p.var: p.type}
                p = p.cont
            elif isinstance(p, LetDestructor):
                typ = self.term(p.term, env)
                if p.else_cont is None and self.has_destructor(p.term):
                    self.report("E_MISSING_ELSE",
                                f"let {p.var} = ... applies a destructor but has no else branch",
                                p.loc, p.var)
                if p.else_cont is not None:
                    self.process(p.else_cont, env)
                env = {**env, p.var: typ or "bitstring"}
                p = p.cont
            elif isinstance(p, IfEq):
                a = self.term(p.left, env)
                b = self.term(p.right, env)
                if self.clash(a, b):
                    self.report("E_TYPE_MISMATCH", f"comparing {a} with {b}", p.loc, "=", expected=(a,))
                self.process(p.then, env)
                p = p.else_
            elif isinstance(p, Event):
                d = self.events.get(p.name)
                if d is None:
                    self.report("E_UNDECLARED", f"undeclared event {p.name!r}", p.loc, p.name)
                    for a in p.args:
                        self.term(a, env)
                elif len(p.args) != d.arity:
                    self.report("E_ARITY", f"event {p.name!r} expects {d.arity} argument(s), got {len(p.args)}",
                                p.loc, p.name, expected_arity=d.arity, got_arity=len(p.args))
                    for a in p.args:
                        self.term(a, env)
                else:
                    for a, want in zip(p.args, d.signature):
                        got = self.term(a, env)
                        if self.clash(got, want):
                            self.report("E_TYPE_MISMATCH", f"event {p.name!r} argument has type {got}, expected {want}",
                                        p.loc, p.name, expected=(want,))
                p = p.cont
            elif isinstance(p, Parallel):
                self.process(p.left, env)
                p = p.right
            elif isinstance(p, Replicate):
                p = p.body
            else:  # pragma: no cover
                raise TypeError(p)

    def channel(self, t, env):
        typ = self.term(t, env)
        if typ is not None and typ != "channel":
            self.report("E_NOT_CHANNEL", f"{_show(t)} has type {typ}, not channel",
                        getattr(t, "loc", NOLOC), _show(t))

    def has_destructor(self, t) -> bool:
        if isinstance(t, Ident):
            return False
        d = self.names.get(t.fn)
        return (d is not None and d.kind is DeclKind.DESTRUCTOR) or any(self.has_destructor(a) for a in t.args)

    # -- queries --------------------------------------------------------------
    def queries(self):
        new_names = {q.name for q in subprocesses(self.model.main_process) if isinstance(q, New)}
        for q in self.model.queries:
            if q.kind is QueryKind.SECRECY:
                d = self.names.get(q.target)
                if d is None or not d.is_name:
                    self.report("E_UNDECLARED", f"undeclared identifier {q.target!r}", q.loc, q.target)
            elif q.kind is QueryKind.CORRESPONDENCE:
                binders = dict(q.binders)
                for _, t in q.binders:
                    self.need_type(t, q.loc)
                ok = True
                for ev, args in ((q.end_event, q.end_args), (q.begin_event, q.begin_args)):
                    d = self.events.get(ev)
                    if d is None:
                        self.report("E_QUERY_UNDECLARED_EVENT", f"query mentions undeclared event {ev!r}", q.loc, ev)
                        ok = False
                        continue
                    if len(args) != d.arity:
                        self.report("E_ARITY", f"event {ev!r} expects {d.arity} argument(s), got {len(args)}",
                                    q.loc, ev, expected_arity=d.arity, got_arity=len(args))
                        ok = False
                    for a in args:
                        if a not in binders:
                            self.report("E_UNBOUND_QUERY_VAR", f"{a!r} is not bound by the query", q.loc, a)
                if not set(q.begin_args) <= set(q.end_args):
                    self.report("E_UNBOUND_QUERY_VAR", "begin event uses variables the end event does not bind",
                                q.loc, q.begin_event or "")
                if ok and self.events[q.end_event].arity != self.events[q.begin_event].arity:
                    self.report("E_QUERY_ARITY", f"{q.end_event!r} and {q.begin_event!r} differ in arity",
                                q.loc, q.end_event)
            else:
                if q.accept_event not in self.events:
                    self.report("E_QUERY_UNDECLARED_EVENT",
                                f"query mentions undeclared event {q.accept_event!r}", q.loc, q.accept_event)
                if q.nonce is not None and q.nonce not in new_names:
                    self.report("E_FRESH_NOT_NEW", f"nonce {q.nonce!r} is never created with new", q.loc, q.nonce)


def _show(t) -> str:
    if isinstance(t, Ident):
        return t.name
    return f"{t.fn}({', '.join(_show(a) for a in t.args)})"


def validate(model: PiModel) -> list[Diagnostic]:
    c = _Checker(model)
    c.declarations()
    c.process(model.main_process, {})
    c.queries()
    return c.diags


def diagnose(source_text: str) -> list[Diagnostic]:
    """Syntax and semantic diagnostics for raw text, never raising."""
    from .parser import PvSyntaxError, parse_syntax

    try:
        model = parse_syntax(source_text)
    except PvSyntaxError as exc:
        t = exc.trace
        return [Diagnostic("E_SYNTAX", t.describe(), Loc(t.line, t.column), t.lexeme, expected=tuple(t.expected))]
    return validate(model)
