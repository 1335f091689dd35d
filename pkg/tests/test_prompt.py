import pytest
from hypothesis import given, settings, strategies as st

from conftest import CORPUS3
from verifiable.errors import BudgetTooSmall
from verifiable.ingest import load_app
from verifiable.slicer import BleSlice, MethodNode, slice_app
from verifiable.translator import KnowledgeBase, RepairRequest, build_prompt, retrieve_context

KB = KnowledgeBase.load()
SHOTS = KB.few_shots()[:2]
CTX = retrieve_context(KB, ["nonce", "key"], k=3)


def make_slice(sizes, distances=None):
    names = [f"C.m{i:02d}" for i in range(len(sizes))]
    distances = distances or list(range(len(sizes)))
    methods = [MethodNode(n, "void f() {" + "x" * s + "}") for n, s in zip(names, sizes)]
    return BleSlice("app", frozenset(names[:1]), methods, dict(zip(names, distances)))


def oracle_kept(sl, budget, bundle_all):
    """Longest prefix (by distance, then name) whose prompt fits, computed arithmetically."""
    rows = sorted(sl.sliced_methods, key=lambda m: (sl.distances[m.qualified_name], m.qualified_name))
    blocks = [f"// {m.qualified_name} (distance {sl.distances[m.qualified_name]})\n{m.body_text}"
              for m in rows]
    fixed = len(bundle_all) - len(bundle_all.slice_payload)
    for n in range(len(rows), 0, -1):
        text = "\n\n".join(blocks[:n])
        dropped = [m.qualified_name for m in rows[n:]]
        if dropped:
            text += (f"\n\n// [truncated: {len(dropped)} method(s) omitted to fit the budget: "
                     f"{', '.join(dropped)}]")
        if fixed + len(text) <= budget:
            return [m.qualified_name for m in rows[:n]]
    return None


def test_sections_in_order():
    sl, _ = slice_app(load_app(CORPUS3 / "com.example.tracker"))
    b = build_prompt(sl, CTX, few_shots=SHOTS)
    text = b.text()
    heads = ["## Method", "## Examples", "## Reference", "## Code"]
    assert [text.index(h) for h in heads] == sorted(text.index(h) for h in heads)
    assert not b.truncated and len(b) <= b.char_budget
    assert b.messages()[0]["role"] == "system"


def test_truncation_keeps_nearest_methods():
    sl = make_slice([400] * 6)
    full = build_prompt(sl, CTX, budget=10**6, few_shots=SHOTS)
    budget = len(full) - 900
    b = build_prompt(sl, CTX, budget=budget, few_shots=SHOTS)
    assert b.truncated and len(b) <= budget
    assert b.kept_methods == oracle_kept(sl, budget, full)
    assert "[truncated: " in b.slice_payload
    assert set(b.kept_methods) | set(b.dropped_methods) == {m.qualified_name for m in sl.sliced_methods}


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=3000), min_size=1, max_size=12),
       st.integers(min_value=10, max_value=40000),
       st.integers(min_value=0, max_value=4))
def test_budget_property(sizes, budget, n_ctx):
    sl = make_slice(sizes, distances=[i % 3 for i in range(len(sizes))])
    ctx = CTX[:n_ctx]
    try:
        b = build_prompt(sl, ctx, budget=budget, few_shots=SHOTS)
    except BudgetTooSmall:
        # raised exactly when one method cannot fit even with no context and a single example
        minimal = build_prompt(sl, [], budget=10**7, few_shots=SHOTS[:1])
        assert oracle_kept(sl, budget, minimal) is None
        return
    assert len(b) <= budget
    assert b.kept_methods
    full = build_prompt(sl, b.retrieved_context, budget=10**7, few_shots=b.few_shot_pairs)
    assert b.kept_methods == oracle_kept(sl, budget, full)


def test_context_dropped_before_methods_vanish():
    sl = make_slice([3000])
    base = build_prompt(sl, [], budget=10**6, few_shots=SHOTS)
    b = build_prompt(sl, CTX, budget=len(base) + 10, few_shots=SHOTS)
    assert b.retrieved_context == [] and b.kept_methods == ["C.m00"]


def test_budget_too_small():
    with pytest.raises(BudgetTooSmall):
        build_prompt(make_slice([10]), CTX, budget=10, few_shots=SHOTS)


def test_repair_section_included():
    sl = make_slice([10])
    rep = RepairRequest("process 0 (", ("[E_SYNTAX] 1:11: boom",), ("E_SYNTAX",))
    text = build_prompt(sl, [], few_shots=SHOTS, repair=rep).text()
    assert text.index("## Repair") < text.index("## Code")
    assert "E_SYNTAX" in text


def test_prompt_is_deterministic():
    sl, _ = slice_app(load_app(CORPUS3 / "com.example.smartlock"))
    assert build_prompt(sl, CTX, few_shots=SHOTS).text() == build_prompt(sl, CTX, few_shots=SHOTS).text()
