"""On-disk knowledge base and BM25 retrieval."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from ..errors import EmptyKnowledgeBase, MalformedKbEntry

CATEGORIES = ("syntax_rules", "protocol_templates", "best_practices", "error_recovery")
K1 = 1.2
B = 0.75

TOKEN_RE = re.compile(r"[a-z0-9_]+")
CODE_RE = re.compile(r"^E_[A-Z_]+$")
FENCE_RE = re.compile(r"```(\w+)[^\n]*\n(.*?)```", re.S)


def tokenize(text: str) -> list[str]:
    return TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class KbEntry:
    id: str
    category: str
    keys: frozenset
    body: str
    recipe: str | None = None
    template: str | None = None
    # fenced blocks by info string, e.g. faulty/corrected or java/pv
    blocks: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def faulty(self) -> str | None:
        return self.blocks.get("faulty")

    @property
    def corrected(self) -> str | None:
        return self.blocks.get("corrected")

    @property
    def example(self) -> tuple[str, str] | None:
        if "java" in self.blocks and "pv" in self.blocks:
            return self.blocks["java"], self.blocks["pv"]
        return None

    @property
    def recipes(self) -> tuple[str, ...]:
        """Recipe names in preference order (the ``recipe`` key is comma-separated)."""
        return tuple(r.strip() for r in (self.recipe or "").split(",") if r.strip())

    @property
    def codes(self) -> frozenset:
        return frozenset(k for k in self.keys if CODE_RE.match(k))

    def index_text(self) -> str:
        return " ".join(sorted(self.keys)) + "\n" + self.body

    def render(self) -> str:
        return f"[{self.category}/{self.id}]\n{self.body.strip()}"


def parse_entry(text: str, path: str = "<string>", category: str | None = None) -> KbEntry:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "---":
        raise MalformedKbEntry(f"{path}: missing front matter")
    try:
        end = lines.index("---", 1)
    except ValueError:
        raise MalformedKbEntry(f"{path}: unterminated front matter") from None
    meta = {}
    for line in lines[1:end]:
        if not line.strip():
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise MalformedKbEntry(f"{path}: bad front matter line {line!r}")
        meta[key.strip()] = value.strip()
    body = "\n".join(lines[end + 1:]).strip() + "\n"
    entry_id = meta.get("id") or Path(path).stem
    cat = meta.get("category") or category
    if cat not in CATEGORIES:
        raise MalformedKbEntry(f"{path}: unknown category {cat!r}")
    keys = frozenset(k.strip() for k in meta.get("keys", "").split(",") if k.strip())
    blocks = {m.group(1): m.group(2) for m in FENCE_RE.finditer(body)}
    entry = KbEntry(entry_id, cat, keys, body, meta.get("recipe"), meta.get("template"), blocks)
    if cat == "error_recovery" and (entry.faulty is None or entry.corrected is None):
        raise MalformedKbEntry(f"{path}: error_recovery entry needs faulty and corrected blocks")
    return entry


class KnowledgeBase:
    """Immutable collection of entries with precomputed BM25 statistics."""

    def __init__(self, entries: Iterable[KbEntry]):
        self.entries = tuple(sorted(entries, key=lambda e: e.id))
        if not self.entries:
            raise EmptyKnowledgeBase("knowledge base has no entries")
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise MalformedKbEntry("duplicate knowledge base ids")
        self._tf = [Counter(tokenize(e.index_text())) for e in self.entries]
        self._len = [sum(tf.values()) for tf in self._tf]
        self.avgdl = sum(self._len) / len(self._len)
        self._df = Counter()
        for tf in self._tf:
            self._df.update(tf.keys())

    @classmethod
    def load(cls, path: str | Path | None = None) -> "KnowledgeBase":
        root = Path(path) if path is not None else default_kb_path()
        if not root.is_dir():
            raise EmptyKnowledgeBase(f"no knowledge base at {root}")
        entries = []
        for f in sorted(root.glob("*/*.md")):
            entries.append(parse_entry(f.read_text(encoding="utf-8"), str(f), f.parent.name))
        return cls(entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def get(self, entry_id: str) -> KbEntry:
        for e in self.entries:
            if e.id == entry_id:
                return e
        raise KeyError(entry_id)

    def category(self, name: str) -> list[KbEntry]:
        return [e for e in self.entries if e.category == name]

    def few_shots(self) -> list[tuple[str, str]]:
        return [e.example for e in self.entries if e.example is not None]

    def idf(self, term: str) -> float:
        n, df = len(self.entries), self._df.get(term, 0)
        return math.log((n - df + 0.5) / (df + 0.5) + 1.0)

    def scores(self, query_keys: Iterable[str]) -> dict[str, float]:
        terms = sorted({t for k in query_keys for t in tokenize(k)})
        out = {}
        for e, tf, dl in zip(self.entries, self._tf, self._len):
            s = 0.0
            for t in terms:
                f = tf.get(t, 0)
                if f:
                    s += self.idf(t) * f * (K1 + 1) / (f + K1 * (1 - B + B * dl / self.avgdl))
            out[e.id] = s
        return out


def default_kb_path() -> Path:
    return Path(str(resources.files("verifiable") / "data" / "kb"))


def retrieve_context(kb: KnowledgeBase, query_keys: Iterable[str], k: int = 4,
                     category: str | None = None) -> list[KbEntry]:
    """Top-``k`` entries: exact diagnostic-code key hits first, then BM25, then id."""
    if kb is None or not len(kb):
        raise EmptyKnowledgeBase("knowledge base has no entries")
    if k < 1:
        raise ValueError("k must be at least 1")
    query_keys = list(query_keys)
    codes = {q for q in query_keys if CODE_RE.match(q)}
    scores = kb.scores(query_keys)
    pool = [e for e in kb.entries if category is None or e.category == category]
    ranked = sorted(pool, key=lambda e: (-len(codes & e.codes), -scores[e.id], e.id))
    return ranked[:k]
