"""Independent exhaustive-interleaving oracle and random model generator.

Written separately from the engine: concrete values only, every process step
interleaved, attacker inputs enumerated from a finite universe of derivable
terms (analysis closure plus constructor applications up to a small depth).
"""

from __future__ import annotations

import itertools
import random

from verifiable.pvlang import parse_model
from verifiable.pvlang.ast import (
    DeclKind, Event, Ident, IfEq, In, LetDestructor, New, Nil, Out, Parallel, Replicate,
)

# -- concrete terms as tuples -------------------------------------------------
# ("n", name) for names, ("f", fn, arg, ...) for applications.


def tdepth(t):
    return 1 if t[0] == "n" else 1 + max((tdepth(a) for a in t[2:]), default=0)


class World:
    def __init__(self, model, bound, synth_depth=2):
        self.model = model
        self.bound = bound
        self.synth_depth = synth_depth
        self.ctors = {d.name: d.arity for d in model.decls(DeclKind.CONSTRUCTOR)}
        self.rules = {}
        for d in model.decls(DeclKind.DESTRUCTOR):
            vs = {v for v, _ in d.rule.variables}
            self.rules[d.name] = ([self._pat(t, vs) for t in d.rule.lhs], self._pat(d.rule.rhs, vs))
        self.public = frozenset(("n", d.name) for d in model.decls(DeclKind.FREE_NAME, DeclKind.CHANNEL))
        n_inputs = _count_inputs(model.main_process, bound)
        self.constants = tuple(("n", f"atk{i}") for i in range(max(1, n_inputs)))
        self._closure_cache = {}
        self._universe_cache = {}

    def _pat(self, t, vs):
        if isinstance(t, Ident):
            return ("v", t.name) if t.name in vs else ("n", t.name)
        return ("f", t.fn) + tuple(self._pat(a, vs) for a in t.args)

    # -- rewriting ----------------------------------------------------------

    def _match(self, pat, t, env):
        if pat[0] == "v":
            if pat[1] in env:
                return env if env[pat[1]] == t else None
            env = dict(env)
            env[pat[1]] = t
            return env
        if pat[0] == "n":
            return env if pat == t else None
        if t[0] != "f" or t[1] != pat[1] or len(t) != len(pat):
            return None
        for p, a in zip(pat[2:], t[2:]):
            env = self._match(p, a, env)
            if env is None:
                return None
        return env

    def _inst(self, pat, env):
        if pat[0] == "v":
            return env[pat[1]]
        if pat[0] == "n":
            return pat
        return pat[:2] + tuple(self._inst(a, env) for a in pat[2:])

    def rewrite(self, fn, args):
        lhs, rhs = self.rules[fn]
        env = {}
        for p, a in zip(lhs, args):
            env = self._match(p, a, env)
            if env is None:
                return None
        return self._inst(rhs, env)

    # -- attacker knowledge -------------------------------------------------

    def closure(self, known: frozenset) -> frozenset:
        hit = self._closure_cache.get(known)
        if hit is not None:
            return hit
        base = set(known) | set(self.public) | set(self.constants)
        changed = True
        while changed:
            changed = False
            for fn, (lhs, rhs) in self.rules.items():
                for u in list(base):
                    env = self._match(lhs[0], u, {})
                    if env is None:
                        continue
                    rest = lhs[1:]
                    # keys that are compound but synthesizable
                    for combo in self._synth_rest(rest, env, base):
                        r = self._inst(rhs, combo)
                        if r not in base:
                            base.add(r)
                            changed = True
        out = frozenset(base)
        self._closure_cache[known] = out
        return out

    def _synth_rest(self, rest, env, base):
        """Instantiate remaining lhs args whose variables are already bound."""
        if all(all(v in env for v in _pvars(p)) for p in rest):
            if all(self._derivable_in(self._inst(p, env), base) for p in rest):
                yield env

    def _derivable_in(self, t, base):
        if t in base:
            return True
        if t[0] == "f" and t[1] in self.ctors:
            return all(self._derivable_in(a, base) for a in t[2:])
        return False

    def derivable(self, t, known: frozenset) -> bool:
        return self._derivable_in(t, self.closure(known))

    def universe(self, known: frozenset) -> list:
        hit = self._universe_cache.get(known)
        if hit is not None:
            return hit
        base = self.closure(known)
        terms = set(base)
        for _ in range(self.synth_depth - 1):
            new = set()
            for fn, ar in self.ctors.items():
                for args in itertools.product(sorted(terms), repeat=ar):
                    t = ("f", fn) + args
                    if tdepth(t) <= self.synth_depth and t not in terms:
                        new.add(t)
            terms |= new
        out = sorted(terms)
        self._universe_cache[known] = out
        return out


def _pvars(p):
    if p[0] == "v":
        yield p[1]
    elif p[0] == "f":
        for a in p[2:]:
            yield from _pvars(a)


def _walk(p):
    yield p
    for attr in ("cont", "else_cont", "then", "else_", "left", "right", "body"):
        q = getattr(p, attr, None)
        if q is not None:
            yield from _walk(q)


def _count_inputs(p, bound, mult=1):
    if isinstance(p, In):
        return mult + _count_inputs(p.cont, bound, mult)
    if isinstance(p, Replicate):
        return _count_inputs(p.body, bound, mult * bound)
    if isinstance(p, Parallel):
        return _count_inputs(p.left, bound, mult) + _count_inputs(p.right, bound, mult)
    if isinstance(p, LetDestructor):
        return _count_inputs(p.cont, bound, mult) + (
            _count_inputs(p.else_cont, bound, mult) if p.else_cont else 0)
    if isinstance(p, IfEq):
        return _count_inputs(p.then, bound, mult) + _count_inputs(p.else_, bound, mult)
    if isinstance(p, (New, Out, Event)):
        return _count_inputs(p.cont, bound, mult)
    return 0


# -- exhaustive interleaving ------------------------------------------------

class Oracle:
    def __init__(self, model, bound=2, synth_depth=2):
        self.w = World(model, bound, synth_depth)
        self.model = model
        self.bound = bound
        self.procs = {}

    def _eval(self, t, env):
        if isinstance(t, Ident):
            if t.name in env:
                return env[t.name]
            if self.w.ctors.get(t.name) == 0:
                return ("f", t.name)
            return ("n", t.name)
        args = []
        for a in t.args:
            v = self._eval(a, env)
            if v is None:
                return None
            args.append(v)
        if t.fn in self.w.rules:
            return self.w.rewrite(t.fn, args)
        return ("f", t.fn) + tuple(args)

    def _spawn(self, proc, env, session, freshness, out, path):
        """Expand structure (|, !, 0, new) into runnable threads."""
        if isinstance(proc, Nil):
            return
        if isinstance(proc, Parallel):
            self._spawn(proc.left, env, session, freshness, out, path + "L")
            self._spawn(proc.right, env, session, freshness, out, path + "R")
            return
        if isinstance(proc, Replicate):
            for j in range(self.bound):
                s = session
                if not s:
                    s = (2 if j == self.bound - 1 else 1) if freshness else j + 1
                self._spawn(proc.body, env, s, freshness, out, path + f"!{j}")
            return
        if isinstance(proc, New):
            env = dict(env)
            env[proc.name] = ("n", f"{proc.name}~{path}~{id(proc)}")
            self._spawn(proc.cont, env, session, freshness, out, path)
            return
        # purely local steps commute with everything else: run them now
        if isinstance(proc, LetDestructor):
            v = self._eval(proc.term, env)
            if v is None:
                nxt = proc.else_cont if proc.else_cont is not None else Nil()
                self._spawn(nxt, env, session, freshness, out, path)
            else:
                env = dict(env)
                env[proc.var] = v
                self._spawn(proc.cont, env, session, freshness, out, path)
            return
        if isinstance(proc, IfEq):
            a = self._eval(proc.left, env)
            b = self._eval(proc.right, env)
            if a is not None and b is not None:
                self._spawn(proc.then if a == b else proc.else_, env, session, freshness, out, path)
            return
        if isinstance(proc, Event) and proc.name not in self._relevant:
            if all(self._eval(a, env) is not None for a in proc.args):
                self._spawn(proc.cont, env, session, freshness, out, path)
            return
        self.procs[id(proc)] = proc
        out.append((id(proc), tuple(sorted(env.items())), session, path))

    def explore(self, freshness=False, accept=None, end=None, begin=None, secret=None):
        """Returns dict with flags: secret_leak, corr_violation, end_reached, replay."""
        self._relevant = {accept} if freshness else {begin, end}
        threads = []
        self._spawn(self.model.main_process, {}, 0, freshness, threads, "")
        start = (tuple(threads), frozenset(), (), 1 if freshness else 0)
        res = {"secret_leak": False, "corr_violation": False, "end_reached": False,
               "replay": False}
        seen = set()
        stack = [start]
        while stack:
            st = stack.pop()
            if st in seen:
                continue
            seen.add(st)
            threads, known, begins, phase = st
            if secret is not None and not res["secret_leak"]:
                if self.w.derivable(("n", secret), known):
                    res["secret_leak"] = True
            for nxt, ev in self._steps(st, freshness):
                if ev is not None:
                    name, arg, session, ph = ev
                    if name == end:
                        res["end_reached"] = True
                        if arg not in begins:
                            res["corr_violation"] = True
                    if name == accept and ph == 2 and session != 1:
                        res["replay"] = True
                stack.append(nxt)
            if freshness and res["replay"]:
                break
            if not freshness and res["secret_leak"] and res["corr_violation"]:
                break
        return res

    def _active(self, session, phase, freshness):
        return not freshness or session == 0 or session == phase

    def _steps(self, st, freshness):
        threads, known, begins, phase = st
        w = self.w
        out = []
        if freshness and phase == 1:
            out.append(((threads, known, begins, 2), None))
        for i, (pid, env_t, session, path) in enumerate(threads):
            if not self._active(session, phase, freshness):
                continue
            proc = self.procs[pid]
            env = dict(env_t)
            rest = threads[:i] + threads[i + 1:]

            def cont(p, env2=env, session=session, path=path, rest=rest):
                new = []
                self._spawn(p, env2, session, freshness, new, path)
                return rest + tuple(new)

            if isinstance(proc, Out):
                ch = self._eval(proc.channel, env)
                m = self._eval(proc.term, env)
                if ch is None or m is None:
                    continue
                if w.derivable(ch, known):
                    k2 = known if (freshness and phase == 2) else known | {m}
                    out.append(((cont(proc.cont), k2, begins, phase), None))
                else:
                    for j, (qid, qenv_t, qs, qpath) in enumerate(threads):
                        q = self.procs[qid]
                        if j == i or not isinstance(q, In) or not self._active(qs, phase, freshness):
                            continue
                        qenv = dict(qenv_t)
                        if self._eval(q.channel, qenv) != ch:
                            continue
                        qenv[q.var] = m
                        new_t = list(threads)
                        a, b = [], []
                        self._spawn(proc.cont, env, session, freshness, a, path)
                        self._spawn(q.cont, qenv, qs, freshness, b, qpath)
                        new_t[i] = None
                        new_t[j] = None
                        flat = tuple(t for t in new_t if t is not None) + tuple(a) + tuple(b)
                        out.append(((flat, known, begins, phase), None))
            elif isinstance(proc, In):
                ch = self._eval(proc.channel, env)
                if ch is None or not w.derivable(ch, known):
                    continue
                for v in w.universe(known):
                    env2 = dict(env)
                    env2[proc.var] = v
                    out.append(((cont(proc.cont, env2), known, begins, phase), None))
            elif isinstance(proc, Event):
                args = [self._eval(a, env) for a in proc.args]
                if any(a is None for a in args):
                    continue
                arg = tuple(args)
                b2 = begins + (arg,) if proc.name == self._begin else begins
                out.append(((cont(proc.cont), known, b2, phase), (proc.name, arg, session, phase)))
        # canonical thread order so equivalent states collide
        return [((tuple(sorted(t)), k, b, p), ev) for (t, k, b, p), ev in out]

    def verdicts(self, secret="s", end="end_e", begin="begin_e", accept="accept_e"):
        self._begin = begin
        r1 = self.explore(secret=secret, end=end, begin=begin)
        has_accept = any(isinstance(q, Event) and q.name == accept
                         for q in _walk(self.model.main_process))
        r2 = self.explore(freshness=True, accept=accept) if has_accept else {"replay": False}
        secrecy = "violated" if r1["secret_leak"] else "holds"
        if r1["corr_violation"]:
            corr = "violated"
        elif not r1["end_reached"]:
            corr = "vacuous"
        else:
            corr = "holds"
        fresh = "violated" if r2["replay"] else "holds"
        if not has_accept:
            fresh = "not_applicable"
        return secrecy, corr, fresh


# -- random models ------------------------------------------------------------

HEADER = """type key.
free c: channel.
free d: channel [private].
free p: bitstring.
free kp: key.
free s: bitstring [private].
free k: key [private].
fun senc(bitstring, key): bitstring.
fun pair(bitstring, bitstring): bitstring.
reduc forall m: bitstring, y: key; sdec(senc(m, y), y) = m.
reduc forall a: bitstring, b: bitstring; fst(pair(a, b)) = a.
event begin_e(bitstring).
event end_e(bitstring).
event accept_e(bitstring).

query attacker(s).
query x: bitstring; event(end_e(x)) ==> event(begin_e(x)).
(*@ fresh(accept_e) *)
"""


class _Gen:
    def __init__(self, rng: random.Random, budget: int, max_inputs: int):
        self.rng = rng
        self.budget = budget
        self.inputs = max_inputs
        self.counter = 0

    def name(self, prefix):
        self.counter += 1
        return f"{prefix}{self.counter}"

    def atom(self, scope):
        return self.rng.choice(scope + ["s", "p"])

    def msg(self, scope):
        r = self.rng.random()
        if r < 0.55:
            return self.atom(scope)
        if r < 0.85:
            return f"senc({self.atom(scope)}, {self.rng.choice(['k', 'k', 'kp'])})"
        return f"pair({self.atom(scope)}, {self.atom(scope)})"

    def proc(self, scope, mult):
        if self.budget <= 0 or self.rng.random() < 0.12:
            return "0"
        self.budget -= 1
        r = self.rng
        kinds = ["out", "event", "new", "let", "if"]
        if self.inputs >= mult:
            kinds += ["in", "in", "in"]
        kind = r.choice(kinds)
        if kind == "out":
            ch = "d" if r.random() < 0.15 else "c"
            return f"out({ch}, {self.msg(scope)}); " + self.proc(scope, mult)
        if kind == "in":
            self.inputs -= mult
            x = self.name("x")
            ch = "d" if r.random() < 0.15 else "c"
            return f"in({ch}, {x}: bitstring); " + self.proc(scope + [x], mult)
        if kind == "new":
            n = self.name("n")
            return f"new {n}: bitstring; " + self.proc(scope + [n], mult)
        if kind == "event":
            ev = r.choice(["begin_e", "end_e", "end_e", "accept_e", "accept_e"])
            return f"event {ev}({self.msg(scope)}); " + self.proc(scope, mult)
        if kind == "let":
            y = self.name("y")
            if r.random() < 0.7:
                term = f"sdec({self.atom(scope)}, {r.choice(['k', 'kp'])})"
            else:
                term = f"fst({self.atom(scope)})"
            then = self.proc(scope + [y], mult)
            els = self.proc(scope, mult) if r.random() < 0.3 else "0"
            return f"let {y} = {term} in ({then}) else ({els})"
        a, b = self.atom(scope), self.msg(scope)
        then = self.proc(scope, mult)
        els = self.proc(scope, mult) if r.random() < 0.3 else "0"
        return f"if {a} = {b} then ({then}) else ({els})"


def _strip(src: str) -> str:
    # "P; 0" is not in the grammar: drop a trailing "; 0"
    while "; 0" in src:
        src = src.replace("; 0", "")
    return src


# Protocol-shaped fragments: (text, steps, inputs). {k} is a key slot.
SENDERS = [
    ("event begin_e(s); out(c, s)", 2, 0),
    ("event begin_e(s); out(c, senc(s, {k}))", 2, 0),
    ("event begin_e(p); out(c, senc(p, {k}))", 2, 0),
    ("in(c, z: bitstring); out(c, senc(z, {k}))", 2, 1),
    ("in(c, z: bitstring); event begin_e(z); out(c, senc(z, {k}))", 3, 1),
    ("in(c, z: bitstring); event begin_e(s); out(c, senc(pair(z, s), {k}))", 3, 1),
]
RECEIVERS = [
    ("in(c, x: bitstring); event end_e(x); event accept_e(x)", 3, 1),
    ("in(c, x: bitstring); let y = sdec(x, {k}) in (event end_e(y); event accept_e(y)) else (0)", 4, 1),
    ("in(c, x: bitstring); let y = sdec(x, {k}) in (event accept_e(y)) else (0)", 3, 1),
    ("new n: bitstring; out(c, n); in(c, x: bitstring); if x = senc(n, {k}) then (event accept_e(n)) else (0)", 5, 1),
    ("in(c, x: bitstring); if x = senc(s, {k}) then (event end_e(s)) else (0)", 3, 1),
    ("new n: bitstring; out(c, n); in(c, x: bitstring); let y = sdec(x, {k}) in (if fst(y) = n then (event end_e(s)) else (0)) else (0)", 5, 1),
]


def _protocol(rng: random.Random, max_steps: int):
    while True:
        a, sa, ia = rng.choice(SENDERS)
        b, sb, ib = rng.choice(RECEIVERS)
        if sa + sb <= max_steps:
            break
    a = a.format(k=rng.choice(["k", "k", "kp"]))
    b = b.format(k=rng.choice(["k", "k", "kp"]))
    # keep the unrolled model at two attacker inputs at most
    bound = 2 if ia + ib <= 1 else 1
    if rng.random() < 0.25:
        body = f"({a}) | !({b})"
        bound = 2 if ib <= 1 and ia == 0 else 1
    else:
        body = f"!({a}) | !({b})"
    return HEADER + "\nprocess\n    " + body + "\n", bound


def random_model(seed: int, max_steps: int = 6):
    """A random well-formed model text plus its session bound."""
    rng = random.Random(seed)
    if rng.random() < 0.5:
        return _protocol(rng, max_steps)
    bound = rng.choice([1, 2, 2])
    max_inputs = 2
    g = _Gen(rng, max_steps, max_inputs)
    shape = rng.choice(["rr", "sr", "r", "ss"])
    if shape == "rr":
        a = g.proc([], bound)
        b = g.proc([], bound)
        body = f"!({_strip(a)}) | !({_strip(b)})"
    elif shape == "sr":
        a = g.proc([], 1)
        b = g.proc([], bound)
        body = f"({_strip(a)}) | !({_strip(b)})"
    elif shape == "r":
        body = f"!({_strip(g.proc([], bound))})"
    else:
        a = g.proc([], 1)
        b = g.proc([], 1)
        body = f"({_strip(a)}) | ({_strip(b)})"
    text = HEADER + "\nprocess\n    " + body + "\n"
    return text, bound


def oracle_verdicts(text: str, bound: int):
    return Oracle(parse_model(text), bound).verdicts()
