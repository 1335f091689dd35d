"""Mechanical repairs, one per error-recovery pattern.

A recipe takes the faulty model text and one diagnostic and returns new text,
or ``None`` when the pattern does not apply. The offline generator applies the
recipes named by the retrieved error-recovery entries.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import replace
from typing import Callable

from ..pvlang import (
    App, Decl, DeclKind, Diagnostic, Event, Ident, IfEq, In, LetDestructor, New, Nil, Out,
    Parallel, PiModel, PvSyntaxError, QueryKind, Replicate, parse_syntax, render, subprocesses,
)

Recipe = Callable[[str, Diagnostic], "str | None"]

# preferred insertion when the parser would accept several tokens
TOKEN_PREFERENCE = (".", ")", ";", "in", "then", ":", "=", "(", ",")
STEP_STARTS = frozenset({"new", "out", "in", "event", "let", "if", "!", "(", "0"})


def _parse(text: str) -> PiModel | None:
    try:
        return parse_syntax(text)
    except PvSyntaxError:
        return None


def map_process(p, fn):
    """Rebuild ``p`` bottom-up; ``fn`` may return a replacement for any node."""
    if isinstance(p, (New, Out, In, Event)):
        p = replace(p, cont=map_process(p.cont, fn))
    elif isinstance(p, LetDestructor):
        other = None if p.else_cont is None else map_process(p.else_cont, fn)
        p = replace(p, cont=map_process(p.cont, fn), else_cont=other)
    elif isinstance(p, IfEq):
        p = replace(p, then=map_process(p.then, fn), else_=map_process(p.else_, fn))
    elif isinstance(p, Parallel):
        p = replace(p, left=map_process(p.left, fn), right=map_process(p.right, fn))
    elif isinstance(p, Replicate):
        p = replace(p, body=map_process(p.body, fn))
    out = fn(p)
    return p if out is None else out


def _terms(p):
    if isinstance(p, Out):
        return [p.channel, p.term]
    if isinstance(p, In):
        return [p.channel]
    if isinstance(p, LetDestructor):
        return [p.term]
    if isinstance(p, IfEq):
        return [p.left, p.right]
    if isinstance(p, Event):
        return list(p.args)
    return []


def _apps(t):
    if isinstance(t, App):
        yield t
        for a in t.args:
            yield from _apps(a)


def _binder_types(model: PiModel) -> dict[str, str]:
    out = {}
    for p in subprocesses(model.main_process):
        if isinstance(p, New):
            out.setdefault(p.name, p.type)
        elif isinstance(p, In):
            out.setdefault(p.var, p.type)
    return out


def _type_of(model: PiModel, t) -> str:
    if isinstance(t, Ident):
        d = model.lookup(t.name)
        if d is not None and d.type_name:
            return d.type_name
        return _binder_types(model).get(t.name, "bitstring")
    d = model.lookup(t.fn, DeclKind.CONSTRUCTOR)
    return d.result if d is not None else "bitstring"


def _insert_decl(model: PiModel, decl: Decl) -> PiModel:
    decls = list(model.declarations)
    if decl.kind is DeclKind.TYPE:
        decls.insert(0, decl)
    else:
        decls.append(decl)
    return model.with_declarations(decls)


# -- recipes ------------------------------------------------------------------

def insert_expected_token(text: str, d: Diagnostic) -> str | None:
    if d.code != "E_SYNTAX" or not d.expected:
        return None
    order = TOKEN_PREFERENCE
    if d.subject in STEP_STARTS:
        # a new step right after a finished one: the separator is missing
        order = (";",) + order
    token = next((t for t in order if t in d.expected), d.expected[0])
    lines = text.split("\n")
    # offset of the offending token, then back up over whitespace
    offset = sum(len(l) + 1 for l in lines[:max(d.loc.line - 1, 0)]) + max(d.loc.column - 1, 0)
    offset = min(offset, len(text))
    while offset > 0 and text[offset - 1].isspace():
        offset -= 1
    piece = token if not token[0].isalpha() else f" {token}"
    return text[:offset] + piece + text[offset:]


def add_else(text: str, d: Diagnostic) -> str | None:
    model = _parse(text)
    if model is None:
        return None
    hit = []

    def fix(p):
        if isinstance(p, LetDestructor) and p.else_cont is None and p.var == d.subject:
            hit.append(p)
            return replace(p, else_cont=Nil())
        return None

    proc = map_process(model.main_process, fix)
    if not hit:
        return None
    return render(PiModel(model.declarations, proc, model.queries))


def declare_undeclared(text: str, d: Diagnostic) -> str | None:
    """Declare a missing event, function or free name, inferring shape from use."""
    model = _parse(text)
    if model is None or not d.subject:
        return None
    name = d.subject
    event_arity = [len(p.args) for p in subprocesses(model.main_process)
                   if isinstance(p, Event) and p.name == name]
    if event_arity:
        arity = Counter(event_arity).most_common(1)[0][0]
        return render(_insert_decl(model, Decl(DeclKind.EVENT, name, ("bitstring",) * arity)))
    uses = [a for p in subprocesses(model.main_process) for t in _terms(p) for a in _apps(t)
            if a.fn == name]
    if uses:
        args = tuple(_type_of(model, a) for a in uses[0].args)
        return render(_insert_decl(model, Decl(DeclKind.CONSTRUCTOR, name, args, "bitstring")))
    typ, channel = "bitstring", False
    for p in subprocesses(model.main_process):
        if isinstance(p, (In, Out)) and p.channel == Ident(name):
            channel = True
        for t in _terms(p):
            for a in _apps(t):
                f = model.lookup(a.fn, DeclKind.CONSTRUCTOR)
                for i, arg in enumerate(a.args):
                    if arg == Ident(name) and f is not None and i < len(f.signature):
                        typ = f.signature[i]
    if channel:
        return render(_insert_decl(model, Decl(DeclKind.CHANNEL, name, ("channel",))))
    secret = typ != "bitstring" or any(
        q.kind is QueryKind.SECRECY and q.target == name for q in model.queries)
    kind = DeclKind.PRIVATE_FREE_NAME if secret else DeclKind.FREE_NAME
    return render(_insert_decl(model, Decl(kind, name, (typ,))))


def declare_type(text: str, d: Diagnostic) -> str | None:
    model = _parse(text)
    if model is None or not d.subject or model.lookup(d.subject, DeclKind.TYPE):
        return None
    return render(_insert_decl(model, Decl(DeclKind.TYPE, d.subject)))


def declare_query_event(text: str, d: Diagnostic) -> str | None:
    model = _parse(text)
    if model is None or not d.subject:
        return None
    arity = 0
    for q in model.queries:
        if q.kind is QueryKind.CORRESPONDENCE:
            binders = dict(q.binders)
            for ev, args in ((q.end_event, q.end_args), (q.begin_event, q.begin_args)):
                if ev == d.subject:
                    return render(_insert_decl(model, Decl(
                        DeclKind.EVENT, ev, tuple(binders.get(a, "bitstring") for a in args))))
        elif q.kind is QueryKind.FRESHNESS and q.accept_event == d.subject:
            arity = max(arity, 1)
    uses = [len(p.args) for p in subprocesses(model.main_process)
            if isinstance(p, Event) and p.name == d.subject]
    arity = uses[0] if uses else arity
    return render(_insert_decl(model, Decl(DeclKind.EVENT, d.subject, ("bitstring",) * arity)))


def fix_arity(text: str, d: Diagnostic) -> str | None:
    """Make a declaration agree with how the process uses it.

    When the process already agrees with the declaration the query is the odd
    one out, and its argument list is adjusted instead.
    """
    model = _parse(text)
    if model is None or d.got_arity < 0:
        return None
    name, got = d.subject, d.got_arity
    event = model.lookup(name, DeclKind.EVENT)
    if event is not None:
        uses = [len(p.args) for p in subprocesses(model.main_process)
                if isinstance(p, Event) and p.name == name]
        if uses and all(u == event.arity for u in uses):
            return _fix_query_arity(model, name, event.arity)
        want = Counter(uses).most_common(1)[0][0] if uses else got
        sig = (event.signature + ("bitstring",) * want)[:want]
        decls = [replace(x, signature=sig) if x is event else x for x in model.declarations]
        return render(model.with_declarations(decls))
    fun = model.lookup(name, DeclKind.CONSTRUCTOR)
    if fun is None:
        return None
    uses = [len(a.args) for p in subprocesses(model.main_process) for t in _terms(p)
            for a in _apps(t) if a.fn == name]
    want = Counter(uses).most_common(1)[0][0] if uses else got
    if want == fun.arity:
        return None
    sig = (fun.signature + ("bitstring",) * want)[:want]
    decls = [replace(x, signature=sig) if x is fun else x for x in model.declarations]
    return render(model.with_declarations(decls))


def _fix_query_arity(model: PiModel, event: str, arity: int) -> str | None:
    queries = []
    changed = False
    for q in model.queries:
        if q.kind is QueryKind.CORRESPONDENCE:
            pool = list(q.end_args) or [v for v, _ in q.binders] or ["x"]
            if q.end_event == event and len(q.end_args) != arity:
                q = replace(q, end_args=tuple((pool * arity)[:arity]))
                changed = True
            if q.begin_event == event and len(q.begin_args) != arity:
                q = replace(q, begin_args=tuple((pool * arity)[:arity]))
                changed = True
        queries.append(q)
    return render(model.with_queries(queries)) if changed else None


def drop_duplicate(text: str, d: Diagnostic) -> str | None:
    model = _parse(text)
    if model is None:
        return None
    seen, decls, dropped = set(), [], False
    for x in model.declarations:
        table = "type" if x.kind is DeclKind.TYPE else "event" if x.kind is DeclKind.EVENT else "name"
        key = (table, x.name)
        if key in seen and x.name == d.subject and not dropped:
            dropped = True
            continue
        seen.add(key)
        decls.append(x)
    return render(model.with_declarations(decls)) if dropped else None


def retype_name(text: str, d: Diagnostic) -> str | None:
    """Give the identifier at the reported position the expected type."""
    model = _parse(text)
    if model is None or not d.expected:
        return None
    want = d.expected[0]
    target = None
    for p in subprocesses(model.main_process):
        for t in _terms(p):
            stack = [t]
            while stack:
                u = stack.pop()
                if isinstance(u, Ident) and u.loc == d.loc:
                    target = u.name
                elif isinstance(u, App):
                    stack.extend(u.args)
    if target is None:
        return None
    return _retype(model, target, want)


def _retype(model: PiModel, name: str, want: str) -> str | None:
    decl = model.lookup(name, DeclKind.FREE_NAME, DeclKind.PRIVATE_FREE_NAME, DeclKind.CHANNEL)
    if decl is not None:
        kind = DeclKind.CHANNEL if want == "channel" and decl.kind is DeclKind.FREE_NAME else decl.kind
        decls = [replace(x, signature=(want,), kind=kind) if x is decl else x
                 for x in model.declarations]
        return render(model.with_declarations(decls))
    hit = []

    def fix(p):
        if isinstance(p, In) and p.var == name and p.type != want:
            hit.append(p)
            return replace(p, type=want)
        if isinstance(p, New) and p.name == name and p.type != want:
            hit.append(p)
            return replace(p, type=want)
        return None

    proc = map_process(model.main_process, fix)
    return render(PiModel(model.declarations, proc, model.queries)) if hit else None


def declare_channel(text: str, d: Diagnostic) -> str | None:
    model = _parse(text)
    if model is None or not d.subject or "(" in d.subject:
        return None
    return _retype(model, d.subject, "channel")


def fix_rewrite_rhs(text: str, d: Diagnostic) -> str | None:
    """Replace a right-hand side variable missing from the left by one that is bound there."""
    model = _parse(text)
    if model is None:
        return None
    decl = model.lookup(d.subject, DeclKind.DESTRUCTOR)
    if decl is None or decl.rule is None or not isinstance(decl.rule.rhs, Ident):
        return None
    rule = decl.rule
    env = dict(rule.variables)
    bound = []
    for arg in rule.lhs:
        stack = [arg]
        while stack:
            u = stack.pop(0)
            if isinstance(u, Ident) and u.name in env and u.name not in bound:
                bound.append(u.name)
            elif isinstance(u, App):
                stack.extend(u.args)
    if rule.rhs.name in bound:
        return None
    want = env.get(rule.rhs.name)
    pick = next((v for v in bound if env[v] == want), None)
    if pick is None:
        return None
    new_rule = replace(rule, rhs=Ident(pick))
    decls = [replace(x, rule=new_rule) if x is decl else x for x in model.declarations]
    return render(model.with_declarations(decls))


def add_query_binder(text: str, d: Diagnostic) -> str | None:
    model = _parse(text)
    if model is None:
        return None
    events = model.events
    queries, changed = [], False
    for q in model.queries:
        if q.kind is QueryKind.CORRESPONDENCE:
            binders = dict(q.binders)
            if set(q.begin_args) - set(q.end_args) and len(q.begin_args) <= len(q.end_args):
                q = replace(q, begin_args=q.end_args[:len(q.begin_args)])
                changed = True
            extra = list(q.binders)
            for ev, args in ((q.end_event, q.end_args), (q.begin_event, q.begin_args)):
                sig = events[ev].signature if ev in events else ()
                for i, a in enumerate(args):
                    if a not in binders:
                        binders[a] = sig[i] if i < len(sig) else "bitstring"
                        extra.append((a, binders[a]))
                        changed = True
            q = replace(q, binders=tuple(extra))
        queries.append(q)
    return render(model.with_queries(queries)) if changed else None


def drop_query(text: str, d: Diagnostic) -> str | None:
    model = _parse(text)
    if model is None:
        return None
    keep = [q for q in model.queries
            if not (q.kind is QueryKind.CORRESPONDENCE and d.subject in (q.end_event, q.begin_event))]
    if len(keep) == len(model.queries):
        return None
    return render(model.with_queries(keep))


def drop_fresh_using(text: str, d: Diagnostic) -> str | None:
    model = _parse(text)
    if model is None:
        return None
    queries = [replace(q, nonce=None) if q.kind is QueryKind.FRESHNESS and q.nonce == d.subject
               else q for q in model.queries]
    if queries == list(model.queries):
        return None
    return render(model.with_queries(queries))


# -- call-site repairs ------------------------------------------------------------

def _map_term(t, fn):
    if isinstance(t, App):
        t = replace(t, args=tuple(_map_term(a, fn) for a in t.args))
    out = fn(t)
    return t if out is None else out


def map_terms(model: PiModel, fn) -> PiModel:
    """Rebuild every term in the process; ``fn`` may return a replacement for any subterm."""
    def node(p):
        if isinstance(p, Out):
            return replace(p, channel=_map_term(p.channel, fn), term=_map_term(p.term, fn))
        if isinstance(p, In):
            return replace(p, channel=_map_term(p.channel, fn))
        if isinstance(p, LetDestructor):
            return replace(p, term=_map_term(p.term, fn))
        if isinstance(p, IfEq):
            return replace(p, left=_map_term(p.left, fn), right=_map_term(p.right, fn))
        if isinstance(p, Event):
            return replace(p, args=tuple(_map_term(a, fn) for a in p.args))
        return None

    return PiModel(model.declarations, map_process(model.main_process, node), model.queries)


def _names_of_type(model: PiModel, typ: str) -> list[str]:
    """Declared names of ``typ``, private ones first."""
    names = [d for d in model.decls(DeclKind.PRIVATE_FREE_NAME, DeclKind.FREE_NAME, DeclKind.CHANNEL)
             if d.type_name == typ]
    return [d.name for d in sorted(names, key=lambda d: d.kind is not DeclKind.PRIVATE_FREE_NAME)]


def _rewrite_call(text: str, d: Diagnostic, change) -> str | None:
    """Apply ``change(model, app)`` to the call of ``d.subject`` at or around ``d.loc``."""
    model = _parse(text)
    if model is None or not d.subject:
        return None
    done = []

    def fn(t):
        if done or not isinstance(t, App) or t.fn != d.subject:
            return None
        if t.loc != d.loc and all(getattr(a, "loc", None) != d.loc for a in t.args):
            return None
        out = change(model, t)
        if out is not None:
            done.append(out)
        return out

    fixed = map_terms(model, fn)
    return render(fixed) if done else None


def fit_call_arity(text: str, d: Diagnostic) -> str | None:
    """Pad or trim a call so it matches the declared arity; padding uses a declared name of the right type."""
    def change(model, t):
        decl = model.lookup(t.fn, DeclKind.CONSTRUCTOR)
        if decl is None or len(t.args) == decl.arity:
            return None
        if len(t.args) > decl.arity:
            return replace(t, args=t.args[:decl.arity])
        args = list(t.args)
        for typ in decl.signature[len(args):]:
            used = {a.name for a in args if isinstance(a, Ident)}
            pool = [n for n in _names_of_type(model, typ) if n not in used]
            if not pool:
                return None
            args.append(Ident(pool[0]))
        return replace(t, args=tuple(args))
    return _rewrite_call(text, d, change)


def fix_argument(text: str, d: Diagnostic) -> str | None:
    """Swap two arguments when that fixes their types, else substitute a name of the expected type."""
    def change(model, t):
        decl = model.lookup(t.fn, DeclKind.CONSTRUCTOR)
        if decl is None or len(t.args) != decl.arity:
            return None
        types = [_type_of(model, a) for a in t.args]
        want = list(decl.signature)
        for i in range(len(types)):
            for j in range(i + 1, len(types)):
                swapped = list(types)
                swapped[i], swapped[j] = swapped[j], swapped[i]
                if swapped == want:
                    args = list(t.args)
                    args[i], args[j] = args[j], args[i]
                    return replace(t, args=tuple(args))
        for i, (a, got) in enumerate(zip(t.args, types)):
            if getattr(a, "loc", None) == d.loc and got != want[i]:
                used = {x.name for x in t.args if isinstance(x, Ident)}
                pool = [n for n in _names_of_type(model, want[i]) if n not in used]
                if pool:
                    return replace(t, args=t.args[:i] + (Ident(pool[0]),) + t.args[i + 1:])
        return None
    return _rewrite_call(text, d, change)


def use_declared_channel(text: str, d: Diagnostic) -> str | None:
    """Send or receive on an existing channel instead of a data value."""
    model = _parse(text)
    if model is None or not d.subject:
        return None
    channels = _names_of_type(model, "channel")
    if not channels:
        return None
    hit = []

    def node(p):
        if isinstance(p, (In, Out)) and isinstance(p.channel, Ident) and p.channel.name == d.subject:
            hit.append(p)
            return replace(p, channel=Ident(channels[0], p.channel.loc))
        return None

    proc = map_process(model.main_process, node)
    return render(PiModel(model.declarations, proc, model.queries)) if hit else None


RECIPES: dict[str, Recipe] = {
    "insert_expected_token": insert_expected_token,
    "add_else": add_else,
    "declare_undeclared": declare_undeclared,
    "declare_type": declare_type,
    "declare_query_event": declare_query_event,
    "fix_arity": fix_arity,
    "drop_duplicate": drop_duplicate,
    "retype_name": retype_name,
    "declare_channel": declare_channel,
    "fix_rewrite_rhs": fix_rewrite_rhs,
    "add_query_binder": add_query_binder,
    "drop_query": drop_query,
    "drop_fresh_using": drop_fresh_using,
    "fit_call_arity": fit_call_arity,
    "fix_argument": fix_argument,
    "use_declared_channel": use_declared_channel,
}
