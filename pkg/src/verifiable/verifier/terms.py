"""Symbolic terms, substitutions and syntactic unification."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Union


@dataclass(frozen=True, slots=True)
class Name:
    name: str
    fresh: bool = False

    def __str__(self):
        return self.name


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __str__(self):
        return "?" + self.name


@dataclass(frozen=True, slots=True)
class Apply:
    fn: str
    args: tuple["Term", ...]

    def __str__(self):
        return f"{self.fn}({', '.join(str(a) for a in self.args)})"


Term = Union[Name, Var, Apply]
Subst = Mapping[Var, Term]

# Names the attacker makes up itself; always public.
ATTACKER_PREFIX = "@"


def attacker_name(i: int) -> Name:
    return Name(f"{ATTACKER_PREFIX}a{i}")


def is_attacker_name(t: Term) -> bool:
    return isinstance(t, Name) and t.name.startswith(ATTACKER_PREFIX)


def depth(t: Term) -> int:
    if isinstance(t, Apply):
        return 1 + max((depth(a) for a in t.args), default=0)
    return 1


def variables(t: Term) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Apply):
        for a in t.args:
            yield from variables(a)


def is_ground(t: Term) -> bool:
    return next(variables(t), None) is None


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, Apply):
        for a in t.args:
            yield from subterms(a)


def apply(t: Term, s: Subst) -> Term:
    if not s:
        return t
    if isinstance(t, Var):
        v = s.get(t)
        return t if v is None else apply(v, s)
    if isinstance(t, Apply):
        return Apply(t.fn, tuple(apply(a, s) for a in t.args))
    return t


def _occurs(v: Var, t: Term, s: Subst) -> bool:
    t = walk(t, s)
    if t == v:
        return True
    return isinstance(t, Apply) and any(_occurs(v, a, s) for a in t.args)


def walk(t: Term, s: Subst) -> Term:
    while isinstance(t, Var) and t in s:
        t = s[t]
    return t


def unify(a: Term, b: Term, s: Subst | None = None) -> dict[Var, Term] | None:
    """Most general unifier extending ``s`` (triangular form), or None."""
    s = dict(s or {})
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x, y = walk(x, s), walk(y, s)
        if x == y:
            continue
        if isinstance(x, Var):
            if _occurs(x, y, s):
                return None
            s[x] = y
        elif isinstance(y, Var):
            if _occurs(y, x, s):
                return None
            s[y] = x
        elif isinstance(x, Apply) and isinstance(y, Apply):
            if x.fn != y.fn or len(x.args) != len(y.args):
                return None
            stack.extend(zip(x.args, y.args))
        else:
            return None
    return s


def unify_all(pairs: Iterable[tuple[Term, Term]], s: Subst | None = None) -> dict[Var, Term] | None:
    out = dict(s or {})
    for a, b in pairs:
        out = unify(a, b, out)
        if out is None:
            return None
    return out


def match(pattern: Term, t: Term, s: dict[Var, Term] | None = None,
          pattern_vars: frozenset[Var] | None = None) -> dict[Var, Term] | None:
    """One-way matching: only variables of ``pattern`` get bound; those of ``t`` are opaque."""
    s = dict(s or {})
    stack = [(pattern, t)]
    while stack:
        p, u = stack.pop()
        if isinstance(p, Var) and (pattern_vars is None or p in pattern_vars):
            bound = s.get(p)
            if bound is None:
                s[p] = u
            elif bound != u:
                return None
        elif isinstance(p, Apply):
            if not isinstance(u, Apply) or p.fn != u.fn or len(p.args) != len(u.args):
                return None
            stack.extend(zip(p.args, u.args))
        elif p != u:
            return None
    return s


def resolve(s: Subst) -> dict[Var, Term]:
    """Idempotent form of a triangular substitution."""
    return {v: apply(t, s) for v, t in s.items()}


@dataclass(frozen=True)
class Rule:
    """Destructor rewrite ``name(lhs) -> rhs``; variables are rule-local."""
    name: str
    lhs: tuple[Term, ...]
    rhs: Term

    @property
    def arity(self) -> int:
        return len(self.lhs)

    def rule_vars(self) -> frozenset[Var]:
        out = set()
        for t in self.lhs:
            out.update(variables(t))
        return frozenset(out)

    def renamed(self, suffix: str) -> "Rule":
        ren = {v: Var(f"{v.name}{suffix}") for v in self.rule_vars()}
        return Rule(self.name, tuple(apply(t, ren) for t in self.lhs), apply(self.rhs, ren))


@dataclass(frozen=True)
class Signature:
    """Public constructors (name -> arity) and destructor rules."""
    constructors: Mapping[str, int]
    destructors: Mapping[str, Rule]

    def is_constructor(self, fn: str) -> bool:
        return fn in self.constructors


def show(t: Term) -> str:
    return str(t)
