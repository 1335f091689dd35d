"""The retrieve, generate and validate loop."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import EmptyCompletion, RetriesExhausted, TransportError
from ..pvlang import Diagnostic, PiModel, diagnose, parse_model
from ..slicer import BleSlice
from .clients import LlmClient, OfflineClient, extract_code, generate
from .kb import KnowledgeBase, retrieve_context
from .prompt import DEFAULT_BUDGET, DEFAULT_FEW_SHOTS, RepairRequest, build_prompt
from .templates import words

DEFAULT_MAX_RETRIES = 5


@dataclass
class Attempt:
    prompt: str
    raw_output: str
    diagnostics: list[Diagnostic]

    def as_dict(self) -> dict:
        return {"prompt": self.prompt, "raw_output": self.raw_output,
                "diagnostics": [d.as_dict() for d in self.diagnostics]}


@dataclass
class TranslationSession:
    slice_ref: str
    max_retries: int = DEFAULT_MAX_RETRIES
    attempts: list[Attempt] = field(default_factory=list)
    final_model: PiModel | None = None
    final_text: str | None = None
    error: str | None = None

    @property
    def retries_used(self) -> int:
        return max(len(self.attempts) - 1, 0)

    @property
    def failed(self) -> bool:
        return self.final_model is None

    def raise_for_failure(self):
        if self.error == "RetriesExhausted":
            raise RetriesExhausted(f"{self.slice_ref}: no valid model after {len(self.attempts)} attempt(s)")

    def as_dict(self, prompts: bool = True) -> dict:
        attempts = [a.as_dict() for a in self.attempts]
        if not prompts:
            for a in attempts:
                a.pop("prompt")
        return {"slice_ref": self.slice_ref, "retries_used": self.retries_used,
                "max_retries": self.max_retries, "error": self.error,
                "final_model": self.final_text, "attempts": attempts}

    def transcript(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def initial_keys(slice: BleSlice) -> list[str]:
    return sorted(words(slice.text()))


def translate_with_repair(slice: BleSlice, max_retries: int = DEFAULT_MAX_RETRIES,
                          client: LlmClient | None = None, kb: KnowledgeBase | None = None,
                          budget: int = DEFAULT_BUDGET, k: int = 4,
                          few_shots: int = DEFAULT_FEW_SHOTS) -> TranslationSession:
    """Generate a model for ``slice``, feeding validator errors back until it is clean.

    Failure is reported on the session (``error``), never raised, so a batch can
    carry on. Prompt sizing problems (``BudgetTooSmall``) do propagate.
    """
    if max_retries < 0:
        raise ValueError("max_retries must be non-negative")
    client = client or OfflineClient()
    kb = kb or KnowledgeBase.load()
    session = TranslationSession(f"{slice.app_id}@{slice.digest()}", max_retries)
    shots = kb.few_shots()[:few_shots]
    context = retrieve_context(kb, initial_keys(slice), k)
    repair = None
    for _ in range(max_retries + 1):
        prompt = build_prompt(slice, context, budget, shots, repair)
        try:
            raw = generate(client, prompt)
        except EmptyCompletion:
            raw = ""
        except TransportError as e:
            session.error = f"{type(e).__name__}: {e}"
            return session
        text = extract_code(raw)
        diags = diagnose(text)
        session.attempts.append(Attempt(prompt.text(), raw, diags))
        if not diags:
            session.final_model = parse_model(text)
            session.final_text = text
            return session
        codes = tuple(dict.fromkeys(d.code for d in diags))
        context = retrieve_context(kb, codes, max(k, len(codes)), category="error_recovery")
        repair = RepairRequest(text, tuple(str(d) for d in diags), codes)
    session.error = "RetriesExhausted"
    return session
