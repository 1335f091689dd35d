"""Concrete re-execution of an attack trace.

The replay follows the recorded schedule step by step with ground values and
checks that every attacker input is derivable at the moment it is sent and that
the trace ends in the claimed violation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..pvlang.ast import (
    Event, Ident, IfEq, In, LetDestructor, New, Nil, Out, Parallel, PiModel, QueryKind,
    QuerySpec, Replicate,
)
from .engine import public_names, signature_of
from .knowledge import saturate
from .result import AttackTrace
from .terms import Apply, Name, Term, apply, match


class ReplayError(Exception):
    pass


@dataclass
class _Thread:
    tid: str
    proc: object
    env: dict
    session: int
    counter: int = 0

    def tick(self) -> str:
        suffix = f"#{self.tid}.{self.counter}"
        self.counter += 1
        return suffix


@dataclass
class ReplayResult:
    ok: bool
    reason: str = ""
    events: list = field(default_factory=list)


class _Machine:
    def __init__(self, model: PiModel, bound: int, freshness: bool, term_depth: int):
        self.sig = signature_of(model)
        self.bound = bound
        self.freshness = freshness
        self.depth = term_depth
        self.initial = public_names(model)
        self.outputs: list[Term] = []
        self.phase = 1 if freshness else 0
        self.events: list = []
        self.threads = [_Thread("p", model.main_process, {}, 0)]
        self.settle()

    def knowledge(self):
        return saturate(self.initial + self.outputs, self.sig, self.depth)

    def active(self, th: _Thread) -> bool:
        return not self.freshness or th.session in (0, self.phase)

    def value(self, th: _Thread, t) -> Term | None:
        if isinstance(t, Ident):
            if t.name in th.env:
                return th.env[t.name]
            if self.sig.constructors.get(t.name) == 0:
                return Apply(t.name, ())
            return Name(t.name)
        args = []
        for a in t.args:
            v = self.value(th, a)
            if v is None:
                return None
            args.append(v)
        rule = self.sig.destructors.get(t.fn)
        if rule is None:
            return Apply(t.fn, tuple(args))
        th.tick()
        s: dict | None = {}
        rv = rule.rule_vars()
        for pat, a in zip(rule.lhs, args):
            s = match(pat, a, s, pattern_vars=rv)
            if s is None:
                return None
        return apply(rule.rhs, s)

    def settle(self):
        """Run every internal step of active threads."""
        changed = True
        while changed:
            changed = False
            nxt = []
            for th in self.threads:
                if not self.active(th):
                    nxt.append(th)
                    continue
                res = self._internal(th)
                if res is None:
                    nxt.append(th)
                else:
                    nxt.extend(res)
                    changed = True
            self.threads = nxt

    def _child_session(self, th, j):
        if th.session:
            return th.session
        if self.freshness:
            return 2 if j == self.bound - 1 else 1
        return j + 1

    def _internal(self, th: _Thread):
        p = th.proc
        if isinstance(p, Nil):
            return []
        if isinstance(p, Parallel):
            parts, stack = [], [p]
            while stack:
                q = stack.pop()
                if isinstance(q, Parallel):
                    stack += [q.right, q.left]
                else:
                    parts.append(q)
            return [_Thread(f"{th.tid}.{j + 1}", q, dict(th.env), th.session)
                    for j, q in enumerate(parts)]
        if isinstance(p, Replicate):
            return [_Thread(f"{th.tid}.r{j + 1}", p.body, dict(th.env), self._child_session(th, j))
                    for j in range(self.bound)]
        if isinstance(p, New):
            th.env[p.name] = Name(p.name + th.tick(), fresh=True)
            th.proc = p.cont
            return [th]
        if isinstance(p, LetDestructor):
            v = self.value(th, p.term)
            if v is None:
                th.proc = p.else_cont if p.else_cont is not None else Nil()
            else:
                th.env[p.var] = v
                th.proc = p.cont
            return [th]
        if isinstance(p, IfEq):
            a = self.value(th, p.left)
            b = None if a is None else self.value(th, p.right)
            if a is None or b is None:
                return []
            th.proc = p.then if a == b else p.else_
            return [th]
        return None

    def find(self, tid: str) -> _Thread:
        for th in self.threads:
            if th.tid == tid:
                return th
        raise ReplayError(f"no runnable thread {tid}")


def replay(model: PiModel, query: QuerySpec, trace: AttackTrace, session_bound: int = 2,
           term_depth: int = 4) -> ReplayResult:
    freshness = query.kind is QueryKind.FRESHNESS
    m = _Machine(model, session_bound, freshness, term_depth)
    try:
        for step in trace.steps:
            _step(m, step)
            m.settle()
    except ReplayError as e:
        return ReplayResult(False, str(e), m.events)
    return _judge(m, query)


def _step(m: _Machine, step):
    a = step.action
    if a == "phase":
        m.phase = 2
        return
    if a == "deduce":
        return
    th = m.find(step.thread)
    p = th.proc
    if a in ("out", "out-unobserved", "comm"):
        if not isinstance(p, Out):
            raise ReplayError(f"{th.tid} is not at an output")
        v = m.value(th, p.term)
        if v != step.term:
            raise ReplayError(f"{th.tid} outputs {v}, trace says {step.term}")
        if a == "comm":
            recv = m.find(step.justification.rsplit(" ", 1)[-1])
            if not isinstance(recv.proc, In):
                raise ReplayError(f"{recv.tid} is not at an input")
            recv.env[recv.proc.var] = v
            recv.proc = recv.proc.cont
        elif a == "out":
            if m.freshness and m.phase == 2:
                raise ReplayError("second-session output recorded as observed")
            m.outputs.append(v)
        th.proc = p.cont
    elif a == "in":
        if not isinstance(p, In):
            raise ReplayError(f"{th.tid} is not at an input")
        if not m.knowledge().derivable(step.term):
            raise ReplayError(f"attacker cannot derive {step.term}")
        th.tick()
        th.env[p.var] = step.term
        th.proc = p.cont
    elif a == "event":
        if not isinstance(p, Event):
            raise ReplayError(f"{th.tid} is not at an event")
        args = []
        for t in p.args:
            v = m.value(th, t)
            if v is None:
                raise ReplayError(f"event argument of {p.name} fails to evaluate")
            args.append(v)
        got = Apply(p.name, tuple(args))
        if got != step.term:
            raise ReplayError(f"{th.tid} emits {got}, trace says {step.term}")
        m.events.append((th.session, m.phase, p.name, tuple(args)))
        th.proc = p.cont
    else:
        raise ReplayError(f"unknown action {a}")


def _judge(m: _Machine, q: QuerySpec) -> ReplayResult:
    if q.kind is QueryKind.SECRECY:
        ok = m.knowledge().derivable(Name(q.target))
        return ReplayResult(ok, "" if ok else f"{q.target} not derivable", m.events)
    if q.kind is QueryKind.FRESHNESS:
        ok = any(name == q.accept_event and phase == 2 and session != 1
                 for session, phase, name, _ in m.events)
        return ReplayResult(ok, "" if ok else "no acceptance in the second session", m.events)
    begins = []
    for _, _, name, args in m.events:
        if name == q.begin_event:
            begins.append(args)
        elif name == q.end_event and len(args) == len(q.end_args):
            env: dict = {}
            if any(env.setdefault(b, v) != v for b, v in zip(q.end_args, args)):
                continue
            want = [env.get(b) for b in q.begin_args]
            if not any(len(g) == len(want) and all(w is None or w == x for w, x in zip(want, g))
                       for g in begins):
                return ReplayResult(True, "", m.events)
    return ReplayResult(False, "every end event is preceded by a matching begin", m.events)
