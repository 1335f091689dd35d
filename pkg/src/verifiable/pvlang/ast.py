"""AST for the restricted applied pi-calculus dialect.

Locations are carried on nodes but excluded from equality, so a parsed and a
hand-built model compare equal when their structure matches.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Union


@dataclass(frozen=True)
class Loc:
    line: int = 0
    column: int = 0

    def __str__(self):
        return f"{self.line}:{self.column}"


NOLOC = Loc()


def _loc():
    return field(default=NOLOC, compare=False, repr=False, hash=False)


# -- terms ------------------------------------------------------------------

@dataclass(frozen=True)
class Ident:
    name: str
    loc: Loc = _loc()


@dataclass(frozen=True)
class App:
    fn: str
    args: tuple["Term", ...]
    loc: Loc = _loc()


Term = Union[Ident, App]


def term_idents(t: Term) -> Iterator[Ident]:
    if isinstance(t, Ident):
        yield t
    else:
        for a in t.args:
            yield from term_idents(a)


# -- declarations -----------------------------------------------------------

class DeclKind(str, Enum):
    TYPE = "type"
    FREE_NAME = "free_name"
    PRIVATE_FREE_NAME = "private_free_name"
    CHANNEL = "channel"
    CONSTRUCTOR = "constructor"
    DESTRUCTOR = "destructor"
    EVENT = "event"


@dataclass(frozen=True)
class Rewrite:
    """``reduc forall vars; g(lhs...) = rhs``."""
    variables: tuple[tuple[str, str], ...]
    lhs: tuple[Term, ...]
    rhs: Term


@dataclass(frozen=True)
class Decl:
    kind: DeclKind
    name: str
    # argument types for constructors/events; (type,) for names
    signature: tuple[str, ...] = ()
    result: str | None = None
    rule: Rewrite | None = None
    loc: Loc = _loc()

    @property
    def arity(self) -> int:
        if self.kind is DeclKind.DESTRUCTOR and self.rule is not None:
            return len(self.rule.lhs)
        return len(self.signature)

    @property
    def is_name(self) -> bool:
        return self.kind in (DeclKind.FREE_NAME, DeclKind.PRIVATE_FREE_NAME, DeclKind.CHANNEL)

    @property
    def type_name(self) -> str | None:
        if self.is_name:
            return self.signature[0] if self.signature else None
        return self.result


# -- processes --------------------------------------------------------------

@dataclass(frozen=True)
class Nil:
    loc: Loc = _loc()


@dataclass(frozen=True)
class New:
    name: str
    type: str
    cont: "Process"
    loc: Loc = _loc()


@dataclass(frozen=True)
class Out:
    channel: Term
    term: Term
    cont: "Process"
    loc: Loc = _loc()


@dataclass(frozen=True)
class In:
    channel: Term
    var: str
    type: str
    cont: "Process"
    loc: Loc = _loc()


@dataclass(frozen=True)
class LetDestructor:
    var: str
    term: Term
    cont: "Process"
    # None means the ``else`` branch was omitted in the source.
    else_cont: "Process | None"
    loc: Loc = _loc()


@dataclass(frozen=True)
class IfEq:
    left: Term
    right: Term
    then: "Process"
    else_: "Process"
    loc: Loc = _loc()


@dataclass(frozen=True)
class Event:
    name: str
    args: tuple[Term, ...]
    cont: "Process"
    loc: Loc = _loc()


@dataclass(frozen=True)
class Parallel:
    left: "Process"
    right: "Process"
    loc: Loc = _loc()


@dataclass(frozen=True)
class Replicate:
    body: "Process"
    loc: Loc = _loc()


Process = Union[Nil, New, Out, In, LetDestructor, IfEq, Event, Parallel, Replicate]


def subprocesses(p: Process) -> Iterator[Process]:
    """Pre-order walk over every process node."""
    yield p
    if isinstance(p, (New, Out, In, Event)):
        yield from subprocesses(p.cont)
    elif isinstance(p, LetDestructor):
        yield from subprocesses(p.cont)
        if p.else_cont is not None:
            yield from subprocesses(p.else_cont)
    elif isinstance(p, IfEq):
        yield from subprocesses(p.then)
        yield from subprocesses(p.else_)
    elif isinstance(p, Parallel):
        yield from subprocesses(p.left)
        yield from subprocesses(p.right)
    elif isinstance(p, Replicate):
        yield from subprocesses(p.body)


def process_size(p: Process) -> int:
    """Number of non-structural steps (everything except 0, | and !)."""
    return sum(1 for q in subprocesses(p) if not isinstance(q, (Nil, Parallel, Replicate)))


# -- queries ----------------------------------------------------------------

class QueryKind(str, Enum):
    SECRECY = "secrecy"
    FRESHNESS = "freshness"
    CORRESPONDENCE = "correspondence"


@dataclass(frozen=True)
class QuerySpec:
    kind: QueryKind
    # secrecy
    target: str | None = None
    # correspondence: binders, end event and begin event with their arguments
    binders: tuple[tuple[str, str], ...] = ()
    end_event: str | None = None
    end_args: tuple[str, ...] = ()
    begin_event: str | None = None
    begin_args: tuple[str, ...] = ()
    # freshness: acceptance event and, optionally, the nonce name claimed to provide it
    accept_event: str | None = None
    nonce: str | None = None
    loc: Loc = _loc()

    @classmethod
    def secrecy(cls, target: str) -> "QuerySpec":
        return cls(QueryKind.SECRECY, target=target)

    @classmethod
    def correspondence(cls, end: str, begin: str, args: tuple[str, ...] = ("x",),
                       types: tuple[str, ...] | None = None) -> "QuerySpec":
        types = types or tuple("bitstring" for _ in args)
        return cls(QueryKind.CORRESPONDENCE, binders=tuple(zip(args, types)), end_event=end,
                   end_args=tuple(args), begin_event=begin, begin_args=tuple(args))

    @classmethod
    def freshness(cls, accept: str, nonce: str | None = None) -> "QuerySpec":
        return cls(QueryKind.FRESHNESS, accept_event=accept, nonce=nonce)

    def describe(self) -> str:
        if self.kind is QueryKind.SECRECY:
            return f"attacker({self.target})"
        if self.kind is QueryKind.CORRESPONDENCE:
            return (f"event({self.end_event}({', '.join(self.end_args)})) ==> "
                    f"event({self.begin_event}({', '.join(self.begin_args)}))")
        nonce = f" using {self.nonce}" if self.nonce else ""
        return f"fresh({self.accept_event}){nonce}"


# -- model ------------------------------------------------------------------

@dataclass(frozen=True)
class PiModel:
    declarations: tuple[Decl, ...]
    main_process: Process
    queries: tuple[QuerySpec, ...] = ()

    def decls(self, *kinds: DeclKind) -> list[Decl]:
        return [d for d in self.declarations if not kinds or d.kind in kinds]

    def lookup(self, name: str, *kinds: DeclKind) -> Decl | None:
        for d in self.declarations:
            if d.name == name and (not kinds or d.kind in kinds):
                return d
        return None

    @property
    def events(self) -> dict[str, Decl]:
        return {d.name: d for d in self.declarations if d.kind is DeclKind.EVENT}

    @property
    def functions(self) -> dict[str, Decl]:
        return {d.name: d for d in self.declarations
                if d.kind in (DeclKind.CONSTRUCTOR, DeclKind.DESTRUCTOR)}

    def with_queries(self, queries) -> "PiModel":
        return PiModel(self.declarations, self.main_process, tuple(queries))

    def with_declarations(self, decls) -> "PiModel":
        return PiModel(tuple(decls), self.main_process, self.queries)
