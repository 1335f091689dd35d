"""Bounded symbolic verifier for pi-models, with an optional ProVerif backend."""

from __future__ import annotations

from dataclasses import replace

from ..errors import ExternalParseError, ExternalToolNotFound
from ..pvlang.ast import PiModel, QueryKind
from .checks import (
    check_correspondence, check_freshness, check_query, check_secrecy, verify_builtin,
)
from .external import find_proverif, parse_results, run_external
from .knowledge import DEFAULT_TERM_DEPTH, DepthCapExceededWarning, KnowledgeSet, saturate
from .replay import ReplayResult, replay
from .result import AttackTrace, Status, TraceStep, Verdict, VerifierConfig
from .terms import Apply, Name, Term, Var


def verify_model(model: PiModel, config: VerifierConfig | None = None) -> list[Verdict]:
    """One verdict per query of ``model``, in query order.

    With ``engine="external"`` (or an ``external_path``) secrecy and correspondence
    go to ProVerif; freshness always runs on the builtin engine. ``engine="both"``
    keeps the builtin verdicts and notes any disagreement with ProVerif. A failing
    query yields an "unknown" verdict instead of aborting the rest.
    """
    cfg = config or VerifierConfig()
    if cfg.engine == "both":
        return _cross_checked(model, cfg)
    if cfg.engine != "external" and not cfg.external_path:
        return verify_builtin(model, cfg)
    try:
        ext = iter(run_external(model, cfg))
    except ExternalToolNotFound as e:
        if not cfg.fallback:
            raise
        note = f"external verifier unavailable ({e}); used builtin engine"
        return [replace(v, warnings=v.warnings + (note,)) for v in verify_builtin(model, cfg)]
    except ExternalParseError as e:
        ext = iter([Verdict(q.describe(), q.kind.value, Status.UNKNOWN, engine="external",
                            detail=str(e), warnings=(e.stderr[-500:],) if e.stderr else ())
                    for q in model.queries if q.kind is not QueryKind.FRESHNESS])
    out = []
    for q in model.queries:
        if q.kind is QueryKind.FRESHNESS:
            out.append(check_freshness(model, q, cfg))
        else:
            out.append(next(ext))
    return out


def _cross_checked(model: PiModel, cfg: VerifierConfig) -> list[Verdict]:
    """Builtin verdicts, annotated wherever ProVerif disagrees or cannot be run."""
    ours = verify_builtin(model, cfg)
    try:
        theirs = iter(run_external(model, cfg))
    except (ExternalToolNotFound, ExternalParseError) as e:
        note = f"cross-check skipped: {e}"
        return [replace(v, warnings=v.warnings + (note,)) for v in ours]
    out = []
    for q, v in zip(model.queries, ours):
        if q.kind is QueryKind.FRESHNESS:
            out.append(v)
            continue
        ext = next(theirs)
        if ext.status is not v.status and Status.UNKNOWN not in (ext.status, v.status):
            v = replace(v, warnings=v.warnings + (
                f"external verifier says {ext.status.value}, builtin says {v.status.value}",))
        out.append(v)
    return out


__all__ = [
    "Apply", "AttackTrace", "DEFAULT_TERM_DEPTH", "DepthCapExceededWarning", "KnowledgeSet",
    "Name", "ReplayResult", "Status", "Term", "TraceStep", "Var", "Verdict", "VerifierConfig",
    "check_correspondence", "check_freshness", "check_query", "check_secrecy", "find_proverif",
    "parse_results", "replay", "run_external", "saturate", "verify_builtin", "verify_model",
]
