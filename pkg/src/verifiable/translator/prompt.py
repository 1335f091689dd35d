"""Prompt assembly under a character budget."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import BudgetTooSmall
from ..slicer import BleSlice
from .kb import KbEntry

DEFAULT_BUDGET = 24_000
DEFAULT_FEW_SHOTS = 2

SYSTEM_PREAMBLE = """\
You translate Bluetooth Low Energy logic from decompiled Android code into a
ProVerif model. Use only these constructs: type, free (optionally [private]),
fun, reduc forall, event, query, new, in, out, let ... in ... else, if ... then
... else, event, | and !. Model the app and the peripheral as two replicated
processes talking on a public channel. Every let that applies a destructor
needs an else branch. Declare events begin_auth, end_auth and accept so that
secrecy, authentication and freshness can be queried."""

COT_INSTRUCTIONS = """\
Work step by step before writing the model:
1. List the values the app sends or receives over BLE and where they come from.
2. Mark which values are encrypted, with what key, and how that key is obtained.
3. Note whether either side creates a fresh random value and checks it later.
4. Note whether the receiver checks who produced a message before acting on it.
5. Write the model. Put it in a single ```pv fenced block after your reasoning."""


@dataclass(frozen=True)
class RepairRequest:
    faulty_output: str
    diagnostics: tuple[str, ...]
    codes: tuple[str, ...]

    def text(self) -> str:
        trace = "\n".join(self.diagnostics)
        return ("## Repair\nThe previous model failed validation.\n"
                f"```faulty\n{self.faulty_output.rstrip()}\n```\nErrors:\n{trace}\n"
                "Fix these errors and return the whole corrected model.")


@dataclass
class PromptBundle:
    system_preamble: str
    cot_instructions: str
    few_shot_pairs: list[tuple[str, str]]
    retrieved_context: list[KbEntry]
    slice_payload: str
    char_budget: int
    repair: RepairRequest | None = None
    kept_methods: list[str] = field(default_factory=list)
    dropped_methods: list[str] = field(default_factory=list)

    @property
    def truncated(self) -> bool:
        return bool(self.dropped_methods)

    def sections(self) -> list[str]:
        out = [self.system_preamble, "## Method\n" + self.cot_instructions]
        if self.few_shot_pairs:
            out.append("## Examples\n" + "\n\n".join(
                f"```java\n{code.rstrip()}\n```\n```pv\n{model.rstrip()}\n```"
                for code, model in self.few_shot_pairs))
        if self.retrieved_context:
            out.append("## Reference\n" + "\n\n".join(e.render() for e in self.retrieved_context))
        if self.repair is not None:
            out.append(self.repair.text())
        out.append("## Code\n" + self.slice_payload)
        return out

    def text(self) -> str:
        return "\n\n".join(self.sections())

    def __len__(self):
        return len(self.text())

    def messages(self) -> list[dict]:
        parts = self.sections()
        return [{"role": "system", "content": parts[0]},
                {"role": "user", "content": "\n\n".join(parts[1:])}]


def method_block(name: str, distance: int, body: str) -> str:
    return f"// {name} (distance {distance})\n{body.rstrip()}"


def ordered_methods(slice: BleSlice) -> list[tuple[str, int, str]]:
    """Methods nearest to an anchor first, name as tie-break."""
    rows = [(m.qualified_name, slice.distances.get(m.qualified_name, 0), m.body_text)
            for m in slice.sliced_methods]
    return sorted(rows, key=lambda r: (r[1], r[0]))


def payload(rows, dropped: list[str]) -> str:
    text = "\n\n".join(method_block(*r) for r in rows)
    if dropped:
        text += (f"\n\n// [truncated: {len(dropped)} method(s) omitted to fit the budget: "
                 f"{', '.join(dropped)}]")
    return text


def build_prompt(slice: BleSlice, context: list[KbEntry], budget: int = DEFAULT_BUDGET,
                 few_shots: list[tuple[str, str]] | None = None,
                 repair: RepairRequest | None = None) -> PromptBundle:
    """Assemble a prompt no longer than ``budget`` characters.

    Methods farthest from an anchor are dropped first. If even the nearest
    method does not fit, retrieved entries and then surplus examples go.
    """
    rows = ordered_methods(slice)
    if not rows:
        raise ValueError("slice has no methods")
    shots = list(few_shots or [])
    ctx = list(context)

    def bundle(n_kept: int) -> PromptBundle:
        kept, dropped = rows[:n_kept], [r[0] for r in rows[n_kept:]]
        return PromptBundle(SYSTEM_PREAMBLE, COT_INSTRUCTIONS, list(shots), list(ctx),
                            payload(kept, dropped), budget, repair,
                            [r[0] for r in kept], dropped)

    while True:
        # the truncation note grows with the drop list, so scan from the top
        for n in range(len(rows), 0, -1):
            b = bundle(n)
            if len(b) <= budget:
                return b
        if ctx:
            ctx.pop()
        elif len(shots) > 1:
            shots.pop()
        else:
            raise BudgetTooSmall(f"budget {budget} cannot hold the fixed prompt and one method")
