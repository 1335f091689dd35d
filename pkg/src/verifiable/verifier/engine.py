"""Bounded symbolic exploration of a pi-model against an active attacker.

Replication is unrolled a fixed number of times. Attacker inputs become fresh
variables with a deducibility constraint; conditionals branch on unification
(then) or a recorded disequality (else). Internal steps, public outputs and
events not under scrutiny run eagerly; the remaining choices (inputs, delayed
begin events, private communications, the freshness phase switch) are
interleaved exhaustively with memoisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from ..errors import StateBudgetExceeded
from ..pvlang.ast import (
    App, DeclKind, Event, Ident, IfEq, In, LetDestructor, New, Nil, Out, Parallel,
    PiModel, Replicate,
)
from .result import TraceStep
from .solver import ConstraintSolver
from .terms import (
    Apply, Name, Rule, Signature, Term, Var, apply, attacker_name, match, unify,
)

MAX_GROUNDINGS = 32


def signature_of(model: PiModel) -> Signature:
    ctors = {d.name: d.arity for d in model.decls(DeclKind.CONSTRUCTOR)}
    rules = {}
    for d in model.decls(DeclKind.DESTRUCTOR):
        r = d.rule
        binders = {v for v, _ in r.variables}
        rules[d.name] = Rule(d.name, tuple(_pattern(t, binders) for t in r.lhs),
                             _pattern(r.rhs, binders))
    return Signature(ctors, rules)


def _pattern(t, binders) -> Term:
    if isinstance(t, Ident):
        return Var(t.name) if t.name in binders else Name(t.name)
    return Apply(t.fn, tuple(_pattern(a, binders) for a in t.args))


def public_names(model: PiModel) -> list[Name]:
    return [Name(d.name) for d in model.decls(DeclKind.FREE_NAME, DeclKind.CHANNEL)]


@dataclass(frozen=True)
class Thread:
    tid: str
    proc: object
    env: tuple = ()
    session: int = 0
    counter: int = 0

    def lookup(self, name: str):
        for k, v in reversed(self.env):
            if k == name:
                return v
        return None

    def bind(self, name: str, value: Term) -> "Thread":
        return replace(self, env=self.env + ((name, value),))

    def tick(self) -> tuple["Thread", str]:
        return replace(self, counter=self.counter + 1), f"#{self.tid}.{self.counter}"


@dataclass(frozen=True)
class State:
    threads: tuple
    s: dict = field(default_factory=dict, compare=False)
    outputs: tuple = ()
    inputs: tuple = ()       # (knowledge index, Var)
    neqs: tuple = ()         # (Term, Term)
    nomatch: tuple = ()      # (args, Rule)
    events: tuple = ()       # (tid, session, name, args)
    trace: tuple = ()        # (session, tid, action, Term|None, extra)
    vars: tuple = ()
    phase: int = 0
    flag: object = None      # set when the goal is reached


@dataclass
class Outcome:
    state: State | None
    grounding: dict | None
    explored: int
    reached: bool = False
    capped: bool = False


class Goal:
    """What the exploration is looking for. Subclasses override the hooks."""
    lazy_events: frozenset = frozenset()
    describe = ""

    def on_event(self, ex: "Explorer", st: State, th: Thread, name: str, args) -> State:
        return st

    def check(self, ex: "Explorer", st: State) -> dict | None:
        return None


class Explorer:
    def __init__(self, model: PiModel, goal: Goal, *, session_bound: int = 2, term_depth: int = 4,
                 state_cap: int = 1_000_000, freshness: bool = False):
        self.model = model
        self.goal = goal
        self.bound = max(1, session_bound)
        self.state_cap = state_cap
        self.freshness = freshness
        self.sig = signature_of(model)
        self.zero_ctors = {n for n, a in self.sig.constructors.items() if a == 0}
        self.solver = ConstraintSolver(self.sig, public_names(model), term_depth)
        self.reached = False

    # -- feasibility --------------------------------------------------------

    def ground(self, st: State, extra: Sequence = (),
               extra_ok: Callable[[dict], bool] | None = None) -> dict | None:
        """A ground substitution satisfying every constraint of ``st``, or None."""

        def partial_ok(s):
            for a, b in st.neqs:
                if apply(a, s) == apply(b, s):
                    return False
            for args, rule in st.nomatch:
                if _matches(rule, [apply(x, s) for x in args]):
                    return False
            return True

        tries = 0
        for sol in self.solver.solve(list(st.inputs) + list(extra), st.outputs, st.s, partial_ok):
            g = _concretize(sol, st.vars)
            if _neg_ok(st, g) and (extra_ok is None or extra_ok(g)):
                return g
            tries += 1
            if tries >= MAX_GROUNDINGS:
                break
        return None

    def feasible(self, st: State) -> bool:
        return self.ground(st) is not None

    def knows(self, st: State, t: Term) -> bool:
        k = self.solver.knowledge([apply(o, st.s) for o in st.outputs])
        return k.derivable(apply(t, st.s))

    # -- term evaluation ----------------------------------------------------

    def value(self, th: Thread, t) -> Term | None:
        """Evaluate a destructor-free term; None if it needs a destructor."""
        if isinstance(t, Ident):
            v = th.lookup(t.name)
            if v is not None:
                return v
            return Apply(t.name, ()) if t.name in self.zero_ctors else Name(t.name)
        if t.fn in self.sig.destructors:
            return None
        args = [self.value(th, a) for a in t.args]
        if any(a is None for a in args):
            return None
        return Apply(t.fn, tuple(args))

    def eval(self, st: State, th: Thread, t) -> list[tuple[State, Thread, Term | None]]:
        """All symbolic outcomes of evaluating ``t``; None marks failure."""
        if isinstance(t, Ident):
            return [(st, th, self.value(th, t))]
        partial = [(st, th, [])]
        for a in t.args:
            nxt = []
            for s1, th1, vals in partial:
                if vals is None:
                    nxt.append((s1, th1, None))
                    continue
                for s2, th2, v in self.eval(s1, th1, a):
                    nxt.append((s2, th2, None if v is None else vals + [v]))
            partial = nxt
        out = []
        for s1, th1, vals in partial:
            if vals is None:
                out.append((s1, th1, None))
            elif t.fn not in self.sig.destructors:
                out.append((s1, th1, Apply(t.fn, tuple(vals))))
            else:
                out.extend(self._destruct(s1, th1, self.sig.destructors[t.fn], vals))
        return out

    def _destruct(self, st: State, th: Thread, rule: Rule, vals):
        th, suffix = th.tick()
        r = rule.renamed(suffix)
        out = []
        s2 = dict(st.s)
        ok = True
        for p, v in zip(r.lhs, vals):
            s2 = unify(p, v, s2)
            if s2 is None:
                ok = False
                break
        if ok:
            new_vars = tuple(sorted(r.rule_vars(), key=lambda v: v.name))
            cand = replace(st, s=s2, vars=st.vars + new_vars)
            if cand.s == st.s or self.feasible(cand):
                out.append((cand, th, apply(r.rhs, s2)))
        args = tuple(apply(v, st.s) for v in vals)
        if not _matches(r, list(args)):
            cand = replace(st, nomatch=st.nomatch + ((args, r),))
            if self.feasible(cand):
                out.append((cand, th, None))
        return out

    # -- process steps ------------------------------------------------------

    def active(self, st: State, th: Thread) -> bool:
        if not self.freshness:
            return True
        return th.session == 0 or th.session == st.phase

    def _public_channel(self, st: State, th: Thread, ch) -> bool | None:
        v = self.value(th, ch)
        if v is None:
            return None
        return self.knows(st, v)

    def _eager_index(self, st: State) -> int | None:
        for i, th in enumerate(st.threads):
            if not self.active(st, th):
                continue
            p = th.proc
            if isinstance(p, (Nil, Parallel, Replicate, New, LetDestructor, IfEq)):
                return i
            if isinstance(p, Event) and p.name not in self.goal.lazy_events:
                return i
            if isinstance(p, Out) and self._public_channel(st, th, p.channel):
                return i
        return None

    def normalize(self, st: State) -> list[State]:
        done, work = [], [st]
        while work:
            cur = work.pop()
            if cur.flag is not None:
                done.append(cur)
                continue
            i = self._eager_index(cur)
            if i is None:
                done.append(cur)
                continue
            work.extend(reversed(self._internal(cur, i)))
        return done

    def _set(self, st: State, i: int, *new_threads) -> State:
        ths = st.threads[:i] + tuple(new_threads) + st.threads[i + 1:]
        return replace(st, threads=ths)

    def _log(self, st: State, th: Thread, action: str, term=None, extra=None) -> State:
        return replace(st, trace=st.trace + ((th.session, th.tid, action, term, extra),))

    def _child_session(self, th: Thread, copy: int) -> int:
        if th.session:
            return th.session
        if self.freshness:
            return 2 if copy == self.bound - 1 else 1
        return copy + 1

    def _internal(self, st: State, i: int) -> list[State]:
        th = st.threads[i]
        p = th.proc
        if isinstance(p, Nil):
            return [self._set(st, i)]
        if isinstance(p, Parallel):
            parts = _flatten(p)
            kids = [Thread(f"{th.tid}.{j + 1}", q, th.env, th.session) for j, q in enumerate(parts)]
            return [self._set(st, i, *kids)]
        if isinstance(p, Replicate):
            kids = [Thread(f"{th.tid}.r{j + 1}", p.body, th.env, self._child_session(th, j))
                    for j in range(self.bound)]
            return [self._set(st, i, *kids)]
        if isinstance(p, New):
            th2, suffix = th.tick()
            n = Name(p.name + suffix, fresh=True)
            return [self._set(st, i, replace(th2.bind(p.name, n), proc=p.cont))]
        if isinstance(p, LetDestructor):
            out = []
            for s1, th1, v in self.eval(st, th, p.term):
                if v is None:
                    if p.else_cont is not None:
                        out.append(self._set(s1, i, replace(th1, proc=p.else_cont)))
                else:
                    out.append(self._set(s1, i, replace(th1.bind(p.var, v), proc=p.cont)))
            return out
        if isinstance(p, IfEq):
            out = []
            for s1, th1, left in self.eval(st, th, p.left):
                if left is None:
                    continue
                for s2, th2, right in self.eval(s1, th1, p.right):
                    if right is None:
                        continue
                    out.extend(self._branch(s2, i, th2, left, right, p))
            return out
        if isinstance(p, Event):
            out = []
            for s1, th1, vals in self._eval_all(st, th, p.args):
                if vals is None:
                    continue
                s2 = self._fire(s1, th1, p.name, vals)
                out.append(self._set(s2, i, replace(th1, proc=p.cont)))
            return out
        if isinstance(p, Out):
            out = []
            for s1, th1, v in self.eval(st, th, p.term):
                if v is None:
                    continue
                observed = not (self.freshness and st.phase == 2)
                if observed:
                    s1 = replace(s1, outputs=s1.outputs + (v,))
                s1 = self._log(s1, th1, "out" if observed else "out-unobserved", v,
                               len(s1.outputs) - 1 if observed else None)
                out.append(self._set(s1, i, replace(th1, proc=p.cont)))
            return out
        raise TypeError(p)

    def _branch(self, st, i, th, left, right, p: IfEq) -> list[State]:
        out = []
        s_then = unify(left, right, st.s)
        if s_then is not None:
            cand = replace(st, s=s_then)
            if s_then == st.s or self.feasible(cand):
                out.append(self._set(cand, i, replace(th, proc=p.then)))
        if apply(left, st.s) != apply(right, st.s):
            cand = replace(st, neqs=st.neqs + ((left, right),))
            if self.feasible(cand):
                out.append(self._set(cand, i, replace(th, proc=p.else_)))
        return out

    def _eval_all(self, st, th, terms):
        partial = [(st, th, [])]
        for t in terms:
            nxt = []
            for s1, th1, vals in partial:
                if vals is None:
                    nxt.append((s1, th1, None))
                    continue
                for s2, th2, v in self.eval(s1, th1, t):
                    nxt.append((s2, th2, None if v is None else vals + [v]))
            partial = nxt
        return [(s, t, None if v is None else tuple(v)) for s, t, v in partial]

    def _fire(self, st: State, th: Thread, name: str, args: tuple) -> State:
        st = replace(st, events=st.events + ((th.tid, th.session, name, args),))
        st = self._log(st, th, "event", Apply(name, args))
        return self.goal.on_event(self, st, th, name, args)

    # -- choice points ------------------------------------------------------

    def successors(self, st: State) -> list[State]:
        out = []
        threads = st.threads
        for i, th in enumerate(threads):
            if not self.active(st, th):
                continue
            p = th.proc
            if isinstance(p, In) and self._public_channel(st, th, p.channel):
                th2, suffix = th.tick()
                v = Var(p.var + suffix)
                s1 = replace(st, inputs=st.inputs + ((len(st.outputs), v),), vars=st.vars + (v,))
                s1 = self._log(s1, th2, "in", v, len(st.outputs))
                out.append(self._set(s1, i, replace(th2.bind(p.var, v), proc=p.cont)))
            elif isinstance(p, Event) and p.name in self.goal.lazy_events:
                for s1, th1, vals in self._eval_all(st, th, p.args):
                    if vals is None:
                        continue
                    s2 = self._fire(s1, th1, p.name, vals)
                    out.append(self._set(s2, i, replace(th1, proc=p.cont)))
            elif isinstance(p, Out) and self._public_channel(st, th, p.channel) is False:
                ch = self.value(th, p.channel)
                for j, other in enumerate(threads):
                    if j == i or not self.active(st, other) or not isinstance(other.proc, In):
                        continue
                    if self.value(other, other.proc.channel) != ch:
                        continue
                    for s1, th1, v in self.eval(st, th, p.term):
                        if v is None:
                            continue
                        s1 = self._log(s1, th1, "comm", v, other.tid)
                        recv = replace(other.bind(other.proc.var, v), proc=other.proc.cont)
                        ths = list(s1.threads)
                        ths[i] = replace(th1, proc=p.cont)
                        ths[j] = recv
                        out.append(replace(s1, threads=tuple(ths)))
        if self.freshness and st.phase == 1:
            out.append(replace(st, phase=2, trace=st.trace + ((0, "", "phase", None, 2),)))
        return out

    # -- search -------------------------------------------------------------

    def initial(self) -> State:
        return State(threads=(Thread("p", self.model.main_process),),
                     phase=1 if self.freshness else 0)

    def run(self) -> Outcome:
        visited = set()
        stack = list(reversed(self.normalize(self.initial())))
        explored = 0
        while stack:
            st = stack.pop()
            if st.flag is not None:
                return Outcome(st, st.flag, explored, True, self.solver.capped)
            key = _key(st)
            if key in visited:
                continue
            visited.add(key)
            explored += 1
            if explored > self.state_cap:
                raise StateBudgetExceeded(explored - 1)
            g = self.goal.check(self, st)
            if g is not None:
                return Outcome(replace(st, flag=g), g, explored, self.reached, self.solver.capped)
            for nxt in reversed(self.successors(st)):
                for n in reversed(self.normalize(nxt)):
                    stack.append(n)
        return Outcome(None, None, explored, self.reached, self.solver.capped)


def _flatten(p) -> list:
    if isinstance(p, Parallel):
        return _flatten(p.left) + _flatten(p.right)
    return [p]


def _matches(rule: Rule, args) -> bool:
    rv = rule.rule_vars()
    s: dict | None = {}
    for pat, a in zip(rule.lhs, args):
        s = match(pat, a, s, pattern_vars=rv)
        if s is None:
            return False
    return True


def _concretize(sol: dict, order: tuple) -> dict:
    names = {v: attacker_name(i + 1) for i, v in enumerate(order)}
    out = {}
    for v in order:
        out[v] = apply(apply(v, sol), names)
    # variables only reachable through the solution (should not happen, but be total)
    for v in sol:
        if v not in out:
            out[v] = apply(apply(v, sol), names)
    return out


def _neg_ok(st: State, g: dict) -> bool:
    for a, b in st.neqs:
        if apply(a, g) == apply(b, g):
            return False
    for args, rule in st.nomatch:
        if _matches(rule, [apply(x, g) for x in args]):
            return False
    return True


def _key(st: State):
    s = st.s

    def env(th):
        return tuple((k, apply(v, s)) for k, v in th.env)

    return (
        tuple((th.tid, id(th.proc), env(th), th.session, th.counter) for th in st.threads),
        tuple(apply(o, s) for o in st.outputs),
        tuple((n, apply(v, s)) for n, v in st.inputs),
        tuple((apply(a, s), apply(b, s)) for a, b in st.neqs),
        tuple((tuple(apply(x, s) for x in args), r.name) for args, r in st.nomatch),
        tuple((tid, name, tuple(apply(a, s) for a in args)) for tid, _, name, args in st.events),
        st.phase,
    )


def render_trace(st: State, g: dict) -> tuple[TraceStep, ...]:
    """Ground the symbolic log of ``st`` into presentable steps."""
    steps = []
    outputs = [apply(o, g) for o in st.outputs]
    for session, tid, action, term, extra in st.trace:
        t = None if term is None else apply(term, g)
        why = ""
        if action == "in":
            known = outputs[:extra]
            if t in known:
                why = f"replays output #{known.index(t) + 1}"
            else:
                why = f"built from public names and outputs 1..{extra}" if extra else \
                    "built from public names"
        elif action == "out":
            why = f"attacker learns output #{extra + 1}"
        elif action == "out-unobserved":
            why = "not observed by the attacker (second session)"
        elif action == "comm":
            why = f"private channel to {extra}"
        elif action == "phase":
            why = "first session ends; attacker knowledge frozen"
        steps.append(TraceStep(session, action, t, why, tid))
    return tuple(steps)
