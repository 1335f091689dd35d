"""Verdicts and attack traces."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .terms import Term


class Status(str, Enum):
    HOLDS = "holds"
    VIOLATED = "violated"
    VACUOUS = "vacuous"
    UNKNOWN = "unknown"
    NOT_APPLICABLE = "not_applicable"


@dataclass(frozen=True)
class TraceStep:
    session_id: int
    action: str
    term: Term | None
    justification: str = ""
    thread: str = ""

    def as_dict(self) -> dict:
        return {"session_id": self.session_id, "action": self.action,
                "term": None if self.term is None else str(self.term),
                "justification": self.justification, "thread": self.thread}

    def __str__(self):
        t = "" if self.term is None else f" {self.term}"
        why = f"  [{self.justification}]" if self.justification else ""
        return f"s{self.session_id} {self.thread:<8} {self.action}{t}{why}"


@dataclass(frozen=True)
class AttackTrace:
    steps: tuple[TraceStep, ...]
    # the symbolic query that was broken, e.g. "attacker(cmd)"
    goal: str = ""

    def as_dict(self) -> dict:
        return {"goal": self.goal, "steps": [s.as_dict() for s in self.steps]}

    def __len__(self):
        return len(self.steps)

    def __str__(self):
        return "\n".join(str(s) for s in self.steps)


@dataclass(frozen=True)
class Verdict:
    query: str
    kind: str
    status: Status
    engine: str = "builtin"
    trace: AttackTrace | None = None
    explored: int = 0
    warnings: tuple[str, ...] = ()
    detail: str = ""

    @property
    def holds(self) -> bool | None:
        """True/False for a decided query; None when undecided or not applicable."""
        if self.status in (Status.HOLDS, Status.VACUOUS):
            return True
        if self.status is Status.VIOLATED:
            return False
        return None

    def as_dict(self) -> dict:
        d = {"query": self.query, "kind": self.kind, "status": self.status.value,
             "engine": self.engine, "explored": self.explored,
             "warnings": list(self.warnings)}
        if self.detail:
            d["detail"] = self.detail
        if self.trace is not None:
            d["trace"] = self.trace.as_dict()
        return d


@dataclass
class VerifierConfig:
    engine: str = "builtin"
    external_path: str | None = None
    session_bound: int = 2
    term_depth: int = 4
    state_cap: int = 1_000_000
    # fall back to the builtin engine when the external tool is unavailable
    fallback: bool = True
    timeout: float = 120.0
    extra: dict = field(default_factory=dict)
