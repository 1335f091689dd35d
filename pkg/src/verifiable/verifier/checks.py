"""Secrecy, correspondence and freshness checks on top of the explorer."""

from __future__ import annotations

from dataclasses import replace

from ..errors import StateBudgetExceeded, VerifiableError
from ..pvlang.ast import DeclKind, Event, PiModel, QueryKind, QuerySpec, subprocesses
from .engine import Explorer, Goal, Outcome, State, render_trace
from .result import AttackTrace, Status, TraceStep, Verdict, VerifierConfig
from .terms import Name, apply


class SecrecyGoal(Goal):
    def __init__(self, target: str):
        self.target = Name(target)
        self.describe = f"attacker({target})"

    def check(self, ex, st: State):
        return ex.ground(st, extra=[(len(st.outputs), self.target)])


class CorrespondenceGoal(Goal):
    def __init__(self, q: QuerySpec):
        self.q = q
        self.lazy_events = frozenset({q.begin_event})
        self.describe = q.describe()

    def on_event(self, ex, st: State, th, name, args) -> State:
        q = self.q
        if name != q.end_event or st.flag is not None:
            return st
        ex.reached = True
        if len(args) != len(q.end_args):
            return st
        begins = [a for _, _, n, a in st.events if n == q.begin_event]
        binders = list(zip(q.end_args, args))

        def violated(g) -> bool:
            env = {}
            for b, v in binders:
                v = apply(v, g)
                if env.setdefault(b, v) != v:
                    # the end event does not instantiate the query pattern
                    return False
            want = [env.get(b) for b in q.begin_args]
            for got in begins:
                if len(got) == len(want) and all(
                        w is None or w == apply(x, g) for w, x in zip(want, got)):
                    return False
            return True

        g = ex.ground(st, extra_ok=violated)
        return st if g is None else replace(st, flag=g)


class FreshnessGoal(Goal):
    def __init__(self, q: QuerySpec):
        self.q = q
        # a shared process may hold back its acceptance until the second phase
        self.lazy_events = frozenset({q.accept_event})
        self.describe = q.describe()

    def on_event(self, ex, st: State, th, name, args) -> State:
        if name != self.q.accept_event or st.phase != 2 or st.flag is not None:
            return st
        ex.reached = True
        g = ex.ground(st)
        return st if g is None else replace(st, flag=g)


def _emits(model: PiModel, event: str) -> bool:
    return any(isinstance(p, Event) and p.name == event for p in subprocesses(model.main_process))


def _explore(model: PiModel, goal: Goal, cfg: VerifierConfig, freshness=False) -> Outcome:
    ex = Explorer(model, goal, session_bound=cfg.session_bound, term_depth=cfg.term_depth,
                  state_cap=cfg.state_cap, freshness=freshness)
    return ex.run()


def _trace(out: Outcome, goal: Goal, final: TraceStep | None = None) -> AttackTrace:
    steps = render_trace(out.state, out.grounding)
    if final is not None:
        steps += (final,)
    return AttackTrace(steps, goal.describe)


def _warnings(out: Outcome) -> tuple[str, ...]:
    return ("term depth cap reached; some attacker deductions were not explored",) \
        if out.capped else ()


def _unknown(query: QuerySpec, err: StateBudgetExceeded) -> Verdict:
    return Verdict(query.describe(), query.kind.value, Status.UNKNOWN, explored=err.explored,
                   warnings=(str(err),), detail="state budget exceeded")


def check_secrecy(model: PiModel, name: str, config: VerifierConfig | None = None) -> Verdict:
    cfg = config or VerifierConfig()
    q = QuerySpec.secrecy(name)
    goal = SecrecyGoal(name)
    try:
        out = _explore(model, goal, cfg)
    except StateBudgetExceeded as e:
        return _unknown(q, e)
    if out.state is None:
        return Verdict(q.describe(), "secrecy", Status.HOLDS, explored=out.explored,
                       warnings=_warnings(out))
    final = TraceStep(0, "deduce", Name(name), "derived from the attacker's knowledge", "attacker")
    return Verdict(q.describe(), "secrecy", Status.VIOLATED, trace=_trace(out, goal, final),
                   explored=out.explored, warnings=_warnings(out))


def check_correspondence(model: PiModel, query: QuerySpec,
                         config: VerifierConfig | None = None) -> Verdict:
    cfg = config or VerifierConfig()
    goal = CorrespondenceGoal(query)
    kind = QueryKind.CORRESPONDENCE.value
    if not _emits(model, query.end_event):
        return Verdict(query.describe(), kind, Status.VACUOUS,
                       detail=f"event {query.end_event} is never emitted")
    try:
        out = _explore(model, goal, cfg)
    except StateBudgetExceeded as e:
        return _unknown(query, e)
    if out.state is not None:
        return Verdict(query.describe(), kind, Status.VIOLATED, trace=_trace(out, goal),
                       explored=out.explored, warnings=_warnings(out))
    if not out.reached:
        return Verdict(query.describe(), kind, Status.VACUOUS, explored=out.explored,
                       warnings=_warnings(out), detail=f"event {query.end_event} is unreachable")
    return Verdict(query.describe(), kind, Status.HOLDS, explored=out.explored,
                   warnings=_warnings(out))


def check_freshness(model: PiModel, query: QuerySpec,
                    config: VerifierConfig | None = None) -> Verdict:
    """Replay check: can the second session accept using only first-session material?"""
    cfg = config or VerifierConfig()
    kind = QueryKind.FRESHNESS.value
    if not query.accept_event or not _emits(model, query.accept_event):
        return Verdict(query.describe(), kind, Status.NOT_APPLICABLE,
                       detail=f"acceptance event {query.accept_event} is never emitted")
    goal = FreshnessGoal(query)
    try:
        out = _explore(model, goal, cfg, freshness=True)
    except StateBudgetExceeded as e:
        return _unknown(query, e)
    if out.state is not None:
        return Verdict(query.describe(), kind, Status.VIOLATED, trace=_trace(out, goal),
                       explored=out.explored, warnings=_warnings(out))
    return Verdict(query.describe(), kind, Status.HOLDS, explored=out.explored,
                   warnings=_warnings(out))


def check_query(model: PiModel, q: QuerySpec, config: VerifierConfig | None = None) -> Verdict:
    if q.kind is QueryKind.SECRECY:
        return check_secrecy(model, q.target, config)
    if q.kind is QueryKind.CORRESPONDENCE:
        return check_correspondence(model, q, config)
    return check_freshness(model, q, config)


def verify_builtin(model: PiModel, config: VerifierConfig | None = None) -> list[Verdict]:
    """One verdict per query, in declaration order."""
    out = []
    for q in model.queries:
        try:
            out.append(check_query(model, q, config))
        except VerifiableError as e:
            out.append(Verdict(q.describe(), q.kind.value, Status.UNKNOWN, detail=str(e)))
    return out


def private_names(model: PiModel) -> list[str]:
    return [d.name for d in model.decls(DeclKind.PRIVATE_FREE_NAME)]
