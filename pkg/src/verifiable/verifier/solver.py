"""Deducibility constraint solving.

A constraint ``(n, t)`` says the attacker must produce ``t`` from the first ``n``
outputs it observed (plus public names). Solving reduces every constraint to a
bare variable, either by unifying ``t`` with an analysed knowledge term or by
decomposing a public constructor application.
"""

from __future__ import annotations

import warnings
from typing import Callable, Iterator, Sequence

from .knowledge import DepthCapExceededWarning, KnowledgeSet, saturate
from .terms import Apply, Name, Signature, Term, Var, apply, depth, is_attacker_name, unify

Constraint = tuple[int, Term]


class ConstraintSolver:
    """Solves constraints against a fixed sequence of observed outputs."""

    def __init__(self, signature: Signature, initial: Sequence[Term], depth_cap: int = 4,
                 max_steps: int = 20000):
        self.signature = signature
        self.initial = tuple(initial)
        self.depth_cap = depth_cap
        self.max_steps = max_steps
        self.capped = False
        self._cache: dict[tuple, KnowledgeSet] = {}

    def knowledge(self, outputs: Sequence[Term]) -> KnowledgeSet:
        key = tuple(outputs)
        k = self._cache.get(key)
        if k is None:
            k = saturate(self.initial + key, self.signature, self.depth_cap)
            self._cache[key] = k
        return k

    def solve(self, constraints: Sequence[Constraint], outputs: Sequence[Term], s: dict,
              ok: Callable[[dict], bool] = lambda s: True) -> Iterator[dict]:
        """Yield substitutions putting every constraint in solved form."""
        self._steps = 0
        seen: set = set()
        for sol in self._solve(list(constraints), tuple(outputs), dict(s), ok):
            key = frozenset((v, apply(v, sol)) for v in sol)
            if key not in seen:
                seen.add(key)
                yield sol

    def satisfiable(self, constraints, outputs, s, ok=lambda s: True) -> dict | None:
        return next(self.solve(constraints, outputs, s, ok), None)

    def _derivable(self, k: KnowledgeSet, t: Term) -> bool:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DepthCapExceededWarning)
            r = k.derivable(t)
        if caught:
            self.capped = True
        return r

    def _solve(self, cs: list, outputs: tuple, s: dict, ok) -> Iterator[dict]:
        self._steps += 1
        if self._steps > self.max_steps or not ok(s):
            return
        pending = []
        for n, t in cs:
            pending.append((n, apply(t, s)))
        for idx, (n, t) in enumerate(pending):
            if isinstance(t, Var):
                continue
            k = self.knowledge([apply(o, s) for o in outputs[:n]])
            if t in k.base or is_attacker_name(t):
                rest = pending[:idx] + pending[idx + 1:]
                yield from self._solve(rest, outputs, s, ok)
                return
            if isinstance(t, Name):
                return
            if not _has_var(t) and self._derivable(k, t):
                rest = pending[:idx] + pending[idx + 1:]
                yield from self._solve(rest, outputs, s, ok)
                return
            rest = pending[:idx] + pending[idx + 1:]
            # unify with something the attacker already holds
            for u in sorted(k.base, key=str):
                if isinstance(u, Var) or not isinstance(u, Apply) or u.fn != t.fn:
                    continue
                s2 = unify(t, u, s)
                if s2 is not None:
                    yield from self._solve(rest, outputs, s2, ok)
            # or build it from its arguments
            if self.signature.is_constructor(t.fn):
                if depth(t) > self.depth_cap:
                    self.capped = True
                    return
                yield from self._solve(rest + [(n, a) for a in t.args], outputs, s, ok)
            return
        yield s


def _has_var(t: Term) -> bool:
    if isinstance(t, Var):
        return True
    return isinstance(t, Apply) and any(_has_var(a) for a in t.args)
