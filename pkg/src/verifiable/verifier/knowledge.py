"""Dolev-Yao attacker knowledge: analysis closure plus bounded synthesis."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable

from .terms import Apply, Rule, Signature, Term, Var, apply, depth, is_attacker_name, match

DEFAULT_TERM_DEPTH = 4


class DepthCapExceededWarning(UserWarning):
    """A deduction was cut off by the term-depth cap."""


@dataclass
class KnowledgeSet:
    """Terms the attacker holds after analysis.

    Membership (``t in k``) also accepts anything synthesizable from the base by
    applying public constructors, as long as the result stays within ``depth_cap``.
    Variables stand for values the attacker chose, so they count as known.
    """
    base: frozenset
    signature: Signature
    depth_cap: int = DEFAULT_TERM_DEPTH
    closed: bool = True
    capped: list = field(default_factory=list, compare=False)

    @property
    def terms(self) -> frozenset:
        return self.base

    def __contains__(self, t: Term) -> bool:
        return self.derivable(t)

    def derivable(self, t: Term) -> bool:
        if t in self.base or isinstance(t, Var) or is_attacker_name(t):
            return True
        if isinstance(t, Apply) and self.signature.is_constructor(t.fn):
            if depth(t) > self.depth_cap:
                self._cap(t)
                return False
            return all(self.derivable(a) for a in t.args)
        return False

    def _cap(self, t: Term) -> None:
        self.capped.append(t)
        warnings.warn(f"term depth cap {self.depth_cap} reached while deriving {t}",
                      DepthCapExceededWarning, stacklevel=3)

    def __len__(self):
        return len(self.base)

    def __iter__(self):
        return iter(sorted(self.base, key=str))


def _analysis_step(base: set, rules: Iterable[Rule], k: KnowledgeSet) -> list[Term]:
    """One round of destructor applications over the current base."""
    found = []
    for rule in rules:
        rvars = rule.rule_vars()
        principals = [i for i, p in enumerate(rule.lhs) if not isinstance(p, Var)]
        if not principals:
            continue
        i = principals[0]
        for u in list(base):
            if isinstance(u, Var):
                continue
            theta = match(rule.lhs[i], u, pattern_vars=rvars)
            if theta is None:
                continue
            # the remaining arguments must be matched against known terms as well
            for sigma in _match_rest(rule, i, theta, rvars, base, k):
                out = apply(rule.rhs, sigma)
                if any(v in rvars for v in _vars(out)):
                    continue
                if out not in base:
                    found.append(out)
    return found


def _vars(t):
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Apply):
        for a in t.args:
            yield from _vars(a)


def _match_rest(rule: Rule, skip: int, theta: dict, rvars, base, k: KnowledgeSet):
    rest = [j for j in range(rule.arity) if j != skip]
    sols = [theta]
    for j in rest:
        nxt = []
        for s in sols:
            p = apply(rule.lhs[j], s)
            open_vars = [v for v in _vars(p) if v in rvars]
            if not open_vars:
                if k.derivable(p):
                    nxt.append(s)
            elif isinstance(p, Var):
                # attacker may supply anything here
                nxt.append(s)
            else:
                for u in base:
                    s2 = match(p, u, s, pattern_vars=rvars)
                    if s2 is not None:
                        nxt.append(s2)
        sols = nxt
    return sols


def saturate(initial: Iterable[Term], signature: Signature,
             depth_cap: int = DEFAULT_TERM_DEPTH, max_rounds: int = 64) -> KnowledgeSet:
    """Close ``initial`` under destructor analysis.

    Synthesis is not materialised; ``KnowledgeSet.derivable`` checks it lazily.
    """
    base = set(initial)
    k = KnowledgeSet(frozenset(base), signature, depth_cap)
    rules = list(signature.destructors.values())
    for _ in range(max_rounds):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DepthCapExceededWarning)
            new = _analysis_step(base, rules, k)
        new = [t for t in new if t not in base]
        if not new:
            break
        base.update(new)
        k = KnowledgeSet(frozenset(base), signature, depth_cap)
    else:
        k.closed = False
    return k

