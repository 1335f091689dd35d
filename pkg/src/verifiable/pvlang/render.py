"""Deterministic pretty-printer producing ProVerif-compatible text."""

from __future__ import annotations

from .ast import (
    App, Decl, DeclKind, Event, Ident, IfEq, In, LetDestructor, New, Nil, Out, Parallel,
    PiModel, QueryKind, QuerySpec, Replicate,
)

INDENT = "    "


def render_term(t) -> str:
    if isinstance(t, Ident):
        return t.name
    return f"{t.fn}({', '.join(render_term(a) for a in t.args)})"


def render_decl(d: Decl) -> str:
    k = d.kind
    if k is DeclKind.TYPE:
        return f"type {d.name}."
    if k in (DeclKind.FREE_NAME, DeclKind.CHANNEL):
        return f"free {d.name}: {d.signature[0]}."
    if k is DeclKind.PRIVATE_FREE_NAME:
        return f"free {d.name}: {d.signature[0]} [private]."
    if k is DeclKind.CONSTRUCTOR:
        return f"fun {d.name}({', '.join(d.signature)}): {d.result}."
    if k is DeclKind.DESTRUCTOR:
        r = d.rule
        binders = ", ".join(f"{v}: {t}" for v, t in r.variables)
        lhs = ", ".join(render_term(a) for a in r.lhs)
        return f"reduc forall {binders}; {d.name}({lhs}) = {render_term(r.rhs)}."
    if k is DeclKind.EVENT:
        return f"event {d.name}({', '.join(d.signature)})." if d.signature else f"event {d.name}."
    raise ValueError(k)


def render_query(q: QuerySpec) -> str:
    if q.kind is QueryKind.SECRECY:
        return f"query attacker({q.target})."
    if q.kind is QueryKind.CORRESPONDENCE:
        binders = ", ".join(f"{v}: {t}" for v, t in q.binders)
        prefix = f"query {binders}; " if binders else "query "

        def atom(name, args):
            return f"event({name}({', '.join(args)}))" if args else f"event({name})"

        return f"{prefix}{atom(q.end_event, q.end_args)} ==> {atom(q.begin_event, q.begin_args)}."
    # ProVerif has no native freshness query; keep it in a pragma comment it will skip.
    using = f" using {q.nonce}" if q.nonce else ""
    return f"(*@ fresh({q.accept_event}){using} *)"


def _dangling(p) -> bool:
    """True if ``p`` ends in an else-less let that would capture a following ``else``."""
    while True:
        if isinstance(p, (New, Out, In, Event)):
            p = p.cont
        elif isinstance(p, LetDestructor):
            if p.else_cont is None:
                return True
            p = p.else_cont
        elif isinstance(p, IfEq):
            p = p.else_
        else:
            return False


def _block(p, depth: int, guard_else: bool = False) -> list[str]:
    """Render ``p`` in a continuation position, parenthesising where precedence needs it."""
    if isinstance(p, Parallel) or (guard_else and _dangling(p)):
        pad = INDENT * depth
        return [pad + "("] + _proc(p, depth + 1) + [pad + ")"]
    return _proc(p, depth)


def _suffix(lines: list[str], cont, depth: int) -> list[str]:
    if isinstance(cont, Nil):
        return lines
    lines[-1] += ";"
    return lines + _block(cont, depth)


def _proc(p, depth: int) -> list[str]:
    pad = INDENT * depth
    if isinstance(p, Nil):
        return [pad + "0"]
    if isinstance(p, New):
        return _suffix([f"{pad}new {p.name}: {p.type}"], p.cont, depth)
    if isinstance(p, Out):
        return _suffix([f"{pad}out({render_term(p.channel)}, {render_term(p.term)})"], p.cont, depth)
    if isinstance(p, In):
        return _suffix([f"{pad}in({render_term(p.channel)}, {p.var}: {p.type})"], p.cont, depth)
    if isinstance(p, Event):
        args = f"({', '.join(render_term(a) for a in p.args)})" if p.args else ""
        return _suffix([f"{pad}event {p.name}{args}"], p.cont, depth)
    if isinstance(p, LetDestructor):
        lines = [f"{pad}let {p.var} = {render_term(p.term)} in"]
        lines += _block(p.cont, depth + 1, guard_else=p.else_cont is not None)
        if p.else_cont is not None:
            lines.append(pad + "else")
            lines += _block(p.else_cont, depth + 1)
        return lines
    if isinstance(p, IfEq):
        lines = [f"{pad}if {render_term(p.left)} = {render_term(p.right)} then"]
        lines += _block(p.then, depth + 1, guard_else=True)
        lines.append(pad + "else")
        lines += _block(p.else_, depth + 1)
        return lines
    if isinstance(p, Parallel):
        parts = []
        node = p
        while isinstance(node, Parallel):
            parts.append(node.right)
            node = node.left
        parts.append(node)
        parts.reverse()
        lines: list[str] = []
        for i, part in enumerate(parts):
            if i:
                lines.append(pad + "|")
            lines += [pad + "("] + _proc(part, depth + 1) + [pad + ")"]
        return lines
    if isinstance(p, Replicate):
        return [pad + "!("] + _proc(p.body, depth + 1) + [pad + ")"]
    raise TypeError(p)


def render_process(p) -> str:
    return "\n".join(_proc(p, 1))


def render(model: PiModel) -> str:
    out = [render_decl(d) for d in model.declarations]
    if model.queries:
        out.append("")
        out += [render_query(q) for q in model.queries]
    out.append("")
    body = _proc(model.main_process, 1)
    if len(body) == 1:
        out.append("process " + body[0].strip())
    else:
        out.append("process")
        out.extend(body)
    return "\n".join(out) + "\n"
