"""Attaching the three security query families to a model."""

from __future__ import annotations

from typing import Iterable

from ..errors import VerifiableError
from .ast import DeclKind, New, PiModel, QueryKind, QuerySpec, subprocesses

FEATURE_QUERY = {
    "secrecy": QueryKind.SECRECY,
    "encryption": QueryKind.SECRECY,
    "freshness": QueryKind.FRESHNESS,
    "nonce": QueryKind.FRESHNESS,
    "authentication": QueryKind.CORRESPONDENCE,
    "correspondence": QueryKind.CORRESPONDENCE,
}
ALL_FEATURES = ("secrecy", "freshness", "authentication")

# Types that mark a private name as key material rather than payload.
_KEY_TYPES = frozenset({"key", "skey", "pkey", "sskey", "spkey", "channel"})


class MissingQueryTarget(VerifiableError):
    """The model has nothing a query for ``feature`` could refer to.

    This is evidence that the feature is absent, not a crash.
    """

    def __init__(self, feature: str):
        super().__init__(f"model has no target for a {feature} query")
        self.feature = feature


def _secrecy_target(model: PiModel) -> str | None:
    for d in model.decls(DeclKind.PRIVATE_FREE_NAME):
        if d.signature and d.signature[0] not in _KEY_TYPES:
            return d.name
    return None


def _auth_pair(model: PiModel) -> tuple[str, str, tuple[str, ...]] | None:
    events = model.events
    pairs = []
    for name, d in events.items():
        if name.startswith("end"):
            suffix = name[3:]
            begin = "begin" + suffix
            if begin in events and events[begin].arity == d.arity:
                pairs.append((0 if suffix == "_auth" else 1, name, begin, d.signature))
    if not pairs:
        return None
    pairs.sort()
    _, end, begin, sig = pairs[0]
    return end, begin, sig


def _accept_event(model: PiModel) -> str | None:
    names = sorted(n for n in model.events if n.startswith("accept"))
    if "accept" in names:
        return "accept"
    return names[0] if names else None


def _nonce(model: PiModel) -> str | None:
    for p in subprocesses(model.main_process):
        if isinstance(p, New) and p.type in ("nonce", "bitstring"):
            return p.name
    return None


def query_for(model: PiModel, feature: str) -> QuerySpec:
    kind = FEATURE_QUERY[feature]
    if kind is QueryKind.SECRECY:
        target = _secrecy_target(model)
        if target is None:
            raise MissingQueryTarget(feature)
        return QuerySpec.secrecy(target)
    if kind is QueryKind.CORRESPONDENCE:
        pair = _auth_pair(model)
        if pair is None:
            raise MissingQueryTarget(feature)
        end, begin, sig = pair
        args = tuple(f"x{i}" if len(sig) > 1 else "x" for i in range(len(sig)))
        return QuerySpec.correspondence(end, begin, args, sig)
    accept = _accept_event(model)
    if accept is None:
        raise MissingQueryTarget(feature)
    return QuerySpec.freshness(accept, _nonce(model))


def inject_queries(model: PiModel, features: Iterable[str]) -> PiModel:
    """Add one query per requested feature unless the model already has one of that kind.

    Raises :class:`MissingQueryTarget` for the first feature without a target;
    use :func:`inject_available` to collect misses instead.
    """
    queries = list(model.queries)
    have = {q.kind for q in queries}
    for feature in features:
        kind = FEATURE_QUERY[feature]
        if kind in have:
            continue
        queries.append(query_for(model, feature))
        have.add(kind)
    return model.with_queries(queries)


def inject_available(model: PiModel, features: Iterable[str] = ALL_FEATURES) -> tuple[PiModel, list[str]]:
    missing = []
    for feature in features:
        try:
            model = inject_queries(model, [feature])
        except MissingQueryTarget:
            missing.append(feature)
    return model, missing
