"""Slice-to-model translation with retrieval grounding and repair."""

from .clients import (
    GarbageClient, LlmClient, OfflineClient, RemoteClient, ScriptedClient, extract_code, generate,
    make_client,
)
from .kb import CATEGORIES, KbEntry, KnowledgeBase, parse_entry, retrieve_context
from .prompt import DEFAULT_BUDGET, PromptBundle, RepairRequest, build_prompt
from .recipes import RECIPES
from .session import DEFAULT_MAX_RETRIES, Attempt, TranslationSession, translate_with_repair
from .templates import TEMPLATES, Fingerprint, fingerprint, select_template

__all__ = [
    "Attempt", "CATEGORIES", "DEFAULT_BUDGET", "DEFAULT_MAX_RETRIES", "Fingerprint",
    "GarbageClient", "KbEntry", "KnowledgeBase", "LlmClient", "OfflineClient", "PromptBundle",
    "RECIPES", "RemoteClient", "RepairRequest", "ScriptedClient", "TEMPLATES", "TranslationSession",
    "build_prompt", "extract_code", "fingerprint", "generate", "make_client", "parse_entry",
    "retrieve_context", "select_template", "translate_with_repair",
]
