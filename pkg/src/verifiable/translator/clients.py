"""Model generators behind one interface: offline templates, scripted output, HTTP."""

from __future__ import annotations

import os
import random
import re
import threading
from typing import Protocol

import requests

from ..errors import EmptyCompletion, Timeout, TransportError
from ..pvlang import diagnose
from .prompt import PromptBundle
from .recipes import RECIPES
from .templates import fingerprint, instantiate, select_template

FENCE_RE = re.compile(r"```([A-Za-z]*)[^\n]*\n(.*?)```", re.S)
MAX_FIXES = 32


class LlmClient(Protocol):
    def complete(self, prompt: PromptBundle) -> str: ...


def extract_code(raw: str) -> str:
    """Model text from a completion: a pv-tagged fence, else any fence, else everything."""
    blocks = FENCE_RE.findall(raw)
    for tag, body in blocks:
        if tag.lower() in ("pv", "proverif"):
            return body.strip() + "\n"
    if blocks:
        return blocks[0][1].strip() + "\n"
    return raw.strip() + "\n"


def generate(client: LlmClient, prompt: PromptBundle) -> str:
    raw = client.complete(prompt)
    if raw is None or not raw.strip():
        raise EmptyCompletion("generator returned an empty completion")
    return raw


class OfflineClient:
    """Deterministic generator.

    Fresh prompts get the protocol template matching the slice's token families.
    Repair prompts get the faulty model patched by the recipes of the retrieved
    error-recovery entries.
    """

    def complete(self, prompt: PromptBundle) -> str:
        if prompt.repair is not None:
            return self.repair(prompt)
        fp = fingerprint(prompt.slice_payload)
        return instantiate(select_template(fp), fp)

    def repair(self, prompt: PromptBundle) -> str:
        recipes = {}
        for e in prompt.retrieved_context:
            for name in e.recipes:
                if name in RECIPES:
                    for code in e.codes:
                        recipes.setdefault(code, []).append(RECIPES[name])
        text = prompt.repair.faulty_output
        for _ in range(MAX_FIXES):
            diags = diagnose(text)
            fixed = _best_fix(text, diags, recipes)
            if fixed is None:
                break
            text = fixed
        return text


def _badness(diags) -> tuple[bool, int]:
    return (any(d.code == "E_SYNTAX" for d in diags), len(diags))


def _best_fix(text: str, diags, recipes) -> str | None:
    """The first candidate that leaves fewer problems; failing that, the first that changes anything."""
    fallback = None
    before = _badness(diags)
    for d in diags:
        for fix in recipes.get(d.code, ()):
            out = fix(text, d)
            if out is None or out == text:
                continue
            if _badness(diagnose(out)) < before:
                return out
            fallback = fallback or out
    return fallback


class ScriptedClient:
    """Replays canned completions; once they run out, defers to ``fallback`` or repeats the last."""

    def __init__(self, outputs, fallback: LlmClient | None = None):
        self.outputs = list(outputs)
        self.fallback = fallback
        self.calls = 0

    def complete(self, prompt: PromptBundle) -> str:
        i = self.calls
        self.calls += 1
        if i < len(self.outputs):
            return self.outputs[i]
        if self.fallback is not None:
            return self.fallback.complete(prompt)
        if not self.outputs:
            return ""
        return self.outputs[-1]


class GarbageClient:
    """Always emits text that is not a model; useful for exercising the retry bound."""

    ALPHABET = "abcxyz(){};.:=| \n"

    def __init__(self, seed: int = 0, length: int = 80):
        self.rng = random.Random(seed)
        self.length = length

    def complete(self, prompt: PromptBundle) -> str:
        body = "".join(self.rng.choice(self.ALPHABET) for _ in range(self.length))
        return "process ((" + body


class RemoteClient:
    """Chat-completions style HTTP endpoint."""

    _slots: dict[int, threading.BoundedSemaphore] = {}

    def __init__(self, url: str | None = None, key: str | None = None, model_name: str = "default",
                 temperature: float = 0.0, timeout: float = 60.0, max_concurrency: int = 2):
        self.url = url or os.environ.get("VERIFIABLE_LLM_URL", "")
        self.key = key if key is not None else os.environ.get("VERIFIABLE_LLM_KEY", "")
        self.model_name = model_name
        self.temperature = temperature
        self.timeout = timeout
        self.slots = self._slots.setdefault(max_concurrency, threading.BoundedSemaphore(max_concurrency))

    def complete(self, prompt: PromptBundle) -> str:
        if not self.url:
            raise TransportError("no endpoint configured (set VERIFIABLE_LLM_URL)")
        body = {"model_name": self.model_name, "messages": prompt.messages(),
                "temperature": self.temperature}
        headers = {"Authorization": f"Bearer {self.key}"} if self.key else {}
        with self.slots:
            try:
                resp = requests.post(self.url, json=body, headers=headers, timeout=self.timeout)
            except requests.Timeout as e:
                raise Timeout(str(e)) from e
            except requests.RequestException as e:
                raise TransportError(str(e)) from e
        if resp.status_code != 200:
            raise TransportError(f"endpoint answered HTTP {resp.status_code}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise TransportError(f"unexpected response shape: {e}") from e
        if not content or not str(content).strip():
            raise EmptyCompletion("endpoint returned an empty completion")
        return str(content)


def make_client(mode: str, **kw) -> LlmClient:
    if mode == "offline":
        return OfflineClient()
    if mode == "remote":
        return RemoteClient(**kw)
    raise ValueError(f"unknown translator mode {mode!r}")
