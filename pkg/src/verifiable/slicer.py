"""Method-level parsing of decompiled Java, call graphs and BLE slices.

The parser is deliberately shallow: it balances braces (ignoring comments and
literals), recognises class and method headers, and collects call-expression
identifiers.  Decompiler output is frequently not compilable, so anything
fancier would reject real inputs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .errors import EmptyAnchors, ParseFailure
from .ingest import AppPackage, SourceUnit

log = logging.getLogger(__name__)

DEFAULT_ANCHORS = frozenset({
    "BluetoothAdapter", "BluetoothDevice", "BluetoothGatt", "BluetoothGattCallback",
    "connectGatt", "onLeScan", "writeCharacteristic", "readCharacteristic",
    "setCharacteristicNotification",
})
DEFAULT_DEPTH_CAP = 8

_KEYWORDS = frozenset({
    "if", "for", "while", "switch", "catch", "synchronized", "return", "new", "throw",
    "else", "do", "try", "finally", "case", "super", "this", "assert", "instanceof",
    "class", "interface", "enum", "import", "package",
})
_MODIFIERS = r"(?:public|private|protected|static|final|synchronized|abstract|native|strictfp|default|transient)"
_METHOD_HEADER = re.compile(
    r"(?:@[\w.]+(?:\([^)]*\))?\s*)*"
    rf"(?:{_MODIFIERS}\s+)*"
    r"(?:<[^{};()]*>\s*)?"
    r"(?:(?P<rtype>[\w$.\[\]<>?,\s]+?)\s+)?"
    r"(?P<name>[A-Za-z_$][\w$]*)\s*\((?P<params>[^(){};]*)\)\s*"
    r"(?:throws\s+[\w$.,\s]+)?\s*$",
    re.S,
)
_CLASS_HEADER = re.compile(r"\b(?:class|interface|enum)\s+([A-Za-z_$][\w$]*)")
_ANON_CLASS = re.compile(r"\bnew\s+[\w$.<>,\s]+\([^;{}]*\)\s*$", re.S)
_CALL = re.compile(r"(?:\b([A-Za-z_$][\w$]*)\s*\.\s*)?\b([A-Za-z_$][\w$]*)\s*\(")


@dataclass
class MethodNode:
    qualified_name: str
    body_text: str = ""
    callees: list[str] = field(default_factory=list)
    is_anchor: bool = False
    external: bool = False

    @property
    def simple_name(self) -> str:
        return self.qualified_name.rsplit(".", 1)[-1]


@dataclass
class CallGraph:
    nodes: dict[str, MethodNode] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def edges(self) -> set[tuple[str, str]]:
        return {(n.qualified_name, c) for n in self.nodes.values() for c in n.callees}

    def callers(self) -> dict[str, list[str]]:
        rev: dict[str, list[str]] = {name: [] for name in self.nodes}
        for caller, callee in sorted(self.edges):
            rev.setdefault(callee, []).append(caller)
        return rev

    def internal(self) -> list[str]:
        return sorted(n for n, node in self.nodes.items() if not node.external)

    @classmethod
    def from_edges(cls, names: Iterable[str], edges: Iterable[tuple[str, str]],
                   bodies: dict[str, str] | None = None) -> "CallGraph":
        """Build a graph directly, mostly for tests and synthetic inputs."""
        g = cls()
        for n in names:
            g.nodes[n] = MethodNode(n, (bodies or {}).get(n, ""))
        for a, b in edges:
            g.nodes.setdefault(a, MethodNode(a))
            g.nodes.setdefault(b, MethodNode(b))
            if b not in g.nodes[a].callees:
                g.nodes[a].callees.append(b)
        return g


@dataclass
class BleSlice:
    app_id: str
    anchor_methods: frozenset[str]
    sliced_methods: list[MethodNode]
    distances: dict[str, int]
    depth_cap: int = DEFAULT_DEPTH_CAP

    @property
    def total_chars(self) -> int:
        return sum(len(m.body_text) for m in self.sliced_methods)

    @property
    def names(self) -> list[str]:
        return [m.qualified_name for m in self.sliced_methods]

    def text(self) -> str:
        return "\n\n".join(m.body_text for m in self.sliced_methods)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "app_id": self.app_id,
            "anchors": sorted(self.anchor_methods),
            "methods": [
                {"name": m.qualified_name, "body": m.body_text, "callees": list(m.callees),
                 "distance": self.distances[m.qualified_name]}
                for m in self.sliced_methods
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "BleSlice":
        anchors = frozenset(data["anchors"])
        methods, dist = [], {}
        for i, m in enumerate(data["methods"]):
            methods.append(MethodNode(m["name"], m["body"], list(m.get("callees", [])),
                                      is_anchor=m["name"] in anchors))
            dist[m["name"]] = m.get("distance", 0 if m["name"] in anchors else i)
        return cls(data["app_id"], anchors, methods, dist)


# ---------------------------------------------------------------------------
# parsing

def _mask(text: str) -> str:
    """Blank out comments, string and char literals, keeping offsets and newlines."""
    out = list(text)
    i, n = 0, len(text)

    def blank(a, b):
        for k in range(a, b):
            if out[k] != "\n":
                out[k] = " "

    while i < n:
        c = text[i]
        if text.startswith("//", i):
            j = text.find("\n", i)
            j = n if j < 0 else j
            blank(i, j)
            i = j
        elif text.startswith("/*", i):
            j = text.find("*/", i + 2)
            j = n if j < 0 else j + 2
            blank(i, j)
            i = j
        elif c in "\"'":
            j = i + 1
            while j < n and text[j] != c and text[j] != "\n":
                j += 2 if text[j] == "\\" else 1
            j = min(j + 1, n)
            blank(i + 1, j - 1)
            i = j
        else:
            i += 1
    return "".join(out)


@dataclass
class _Span:
    kind: str          # "class", "method", "block"
    name: str          # class name or qualified method name
    header_start: int
    open_pos: int
    close_pos: int = -1
    children: list["_Span"] = field(default_factory=list)


def _header_before(masked: str, pos: int) -> tuple[str, int]:
    start = max(masked.rfind(";", 0, pos), masked.rfind("{", 0, pos), masked.rfind("}", 0, pos)) + 1
    return masked[start:pos], start


def _scan_unit(unit: SourceUnit) -> tuple[list[_Span], str]:
    masked = _mask(unit.text)
    root = _Span("class", unit.class_name, 0, -1)
    stack = [root]
    class_stack = [unit.class_name]
    methods: list[_Span] = []
    for pos, ch in enumerate(masked):
        if ch == "{":
            header, hstart = _header_before(masked, pos)
            lead = len(header) - len(header.lstrip())
            hstart += lead
            header = header.strip()
            parent = stack[-1]
            cls_match = _CLASS_HEADER.search(header)
            if cls_match and "(" not in header.split(cls_match.group(0))[0]:
                span = _Span("class", cls_match.group(1), hstart, pos)
                class_stack.append(cls_match.group(1))
            elif parent.kind == "class" and (m := _METHOD_HEADER.fullmatch(header)) \
                    and m.group("name") not in _KEYWORDS and not header.startswith("new ") \
                    and "=" not in header and "->" not in header:
                span = _Span("method", f"{class_stack[-1]}.{m.group('name')}", hstart, pos)
                methods.append(span)
            elif _ANON_CLASS.search(header):
                # anonymous class body: methods inside qualify with the outer class
                span = _Span("class", class_stack[-1], hstart, pos)
                class_stack.append(class_stack[-1])
            else:
                span = _Span("block", "", hstart, pos)
            parent.children.append(span)
            stack.append(span)
        elif ch == "}":
            if len(stack) == 1:
                line = masked.count("\n", 0, pos) + 1
                raise ParseFailure(unit.path, line, "unmatched '}'")
            span = stack.pop()
            span.close_pos = pos
            if span.kind == "class":
                class_stack.pop()
    if len(stack) != 1:
        line = masked.count("\n", 0, stack[-1].open_pos) + 1
        raise ParseFailure(unit.path, line, "unclosed '{'")
    return methods, masked


def _own_text(masked: str, span: _Span) -> str:
    """Masked body of ``span`` with nested method bodies blanked out."""
    chars = list(masked[span.open_pos:span.close_pos + 1])

    def nested(s: _Span):
        for child in s.children:
            if child.kind == "method":
                for k in range(child.header_start - span.open_pos, child.close_pos + 1 - span.open_pos):
                    if 0 <= k < len(chars):
                        chars[k] = " "
            else:
                nested(child)

    nested(span)
    return "".join(chars)


def parse_sources(app: AppPackage, tolerant: bool = True) -> CallGraph:
    graph = CallGraph()
    raw_calls: dict[str, list[tuple[str | None, str]]] = {}
    for unit in app.source_units:
        try:
            spans, masked = _scan_unit(unit)
        except ParseFailure as exc:
            if not tolerant:
                raise
            graph.warnings.append(str(exc))
            log.warning("skipping unparseable unit: %s", exc)
            continue
        for span in spans:
            body = unit.text[span.header_start:span.close_pos + 1]
            node = graph.nodes.get(span.name)
            if node is None:
                graph.nodes[span.name] = MethodNode(span.name, body)
            else:  # overload: merge
                node.body_text += "\n" + body
            own = _own_text(masked, span)
            calls = raw_calls.setdefault(span.name, [])
            for m in _CALL.finditer(own):
                receiver, name = m.group(1), m.group(2)
                before = own[:m.start(2)].rstrip()
                if name in _KEYWORDS or before.endswith("new"):
                    continue
                calls.append((receiver, name))

    by_simple: dict[str, list[str]] = {}
    for q in sorted(graph.nodes):
        by_simple.setdefault(q.rsplit(".", 1)[-1], []).append(q)

    stubs: dict[str, MethodNode] = {}
    for q in sorted(raw_calls):
        node = graph.nodes[q]
        seen = set(node.callees)
        for receiver, name in raw_calls[q]:
            targets = by_simple.get(name)
            if not targets:
                stub = f"{receiver}.{name}" if receiver and receiver[0].isupper() else name
                stubs.setdefault(stub, MethodNode(stub, external=True))
                targets = [stub]
            for t in targets:
                if t not in seen:
                    seen.add(t)
                    node.callees.append(t)
    for name, stub in stubs.items():
        graph.nodes.setdefault(name, stub)
    return graph


def _has_token(text: str, token: str) -> bool:
    return re.search(rf"(?<![\w$]){re.escape(token)}(?![\w$])", text) is not None


def find_ble_anchors(graph: CallGraph, anchor_tokens: Iterable[str] = DEFAULT_ANCHORS) -> set[str]:
    tokens = tuple(anchor_tokens)
    hits = set()
    for name, node in graph.nodes.items():
        if node.external:
            continue
        node.is_anchor = any(_has_token(node.body_text, t) for t in tokens)
        if node.is_anchor:
            hits.add(name)
    return hits


def _bfs(start: Iterable[str], succ: dict[str, list[str]], cap: int,
         allowed: set[str]) -> dict[str, int]:
    dist = {s: 0 for s in start}
    queue = deque(sorted(dist))
    while queue:
        u = queue.popleft()
        if dist[u] >= cap:
            continue
        for v in succ.get(u, ()):
            if v in allowed and v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def slice_graph(graph: CallGraph, anchors: Iterable[str], depth_cap: int = DEFAULT_DEPTH_CAP,
                app_id: str = "") -> BleSlice:
    """Anchors plus everything they reach and everything that reaches them, within ``depth_cap`` hops."""
    anchors = set(anchors)
    if not anchors:
        raise EmptyAnchors(app_id or "<graph>")
    if depth_cap < 1:
        raise ValueError("depth_cap must be >= 1")
    missing = anchors - graph.nodes.keys()
    if missing:
        raise ValueError(f"anchors not in graph: {sorted(missing)}")

    internal = {n for n, node in graph.nodes.items() if not node.external}
    forward = {n: node.callees for n, node in graph.nodes.items()}
    fdist = _bfs(anchors, forward, depth_cap, internal)
    bdist = _bfs(anchors, graph.callers(), depth_cap, internal)

    dist = dict(fdist)
    for n, d in bdist.items():
        dist[n] = min(d, dist.get(n, d))
    order = sorted(dist, key=lambda n: (dist[n], n))
    methods = [graph.nodes[n] for n in order]
    for m in methods:
        m.is_anchor = m.qualified_name in anchors
    return BleSlice(app_id, frozenset(anchors), methods, dist, depth_cap)


# The public name mirrors the operation; ``slice`` would shadow the builtin.
slice = slice_graph


def slice_app(app: AppPackage, anchor_tokens: Iterable[str] = DEFAULT_ANCHORS,
              depth_cap: int = DEFAULT_DEPTH_CAP, tolerant: bool = True) -> tuple[BleSlice, CallGraph]:
    graph = parse_sources(app, tolerant=tolerant)
    anchors = find_ble_anchors(graph, anchor_tokens)
    return slice_graph(graph, anchors, depth_cap, app.app_id), graph
