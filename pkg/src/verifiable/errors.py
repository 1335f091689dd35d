"""Exception hierarchy shared across the pipeline stages."""

from __future__ import annotations


class VerifiableError(Exception):
    """Base class for every error raised by this package."""


# -- ingest -----------------------------------------------------------------

class NotADirectory(VerifiableError):
    pass


class NoSourcesFound(VerifiableError):
    pass


class MalformedMetadata(VerifiableError):
    pass


# -- slicer -----------------------------------------------------------------

class ParseFailure(VerifiableError):
    def __init__(self, path: str, line: int, reason: str = "unbalanced braces"):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason


class EmptyAnchors(VerifiableError):
    """The app looked like a BLE app but no method matched an anchor token."""


# -- translator -------------------------------------------------------------

class EmptyKnowledgeBase(VerifiableError):
    pass


class MalformedKbEntry(VerifiableError):
    pass


class BudgetTooSmall(VerifiableError):
    pass


class TransportError(VerifiableError):
    pass


class Timeout(TransportError):
    pass


class EmptyCompletion(VerifiableError):
    pass


class RetriesExhausted(VerifiableError):
    """The repair loop ran out of attempts without a valid model."""


# -- verifier ---------------------------------------------------------------

class StateBudgetExceeded(VerifiableError):
    def __init__(self, explored: int):
        super().__init__(f"state budget exhausted after {explored} states")
        self.explored = explored


class ExternalToolNotFound(VerifiableError):
    pass


class DecompilerFailed(VerifiableError):
    pass


class ExternalParseError(VerifiableError):
    def __init__(self, message: str, raw_output: str = "", stderr: str = ""):
        super().__init__(message)
        self.raw_output = raw_output
        self.stderr = stderr


# -- classifier -------------------------------------------------------------

class DuplicateFeatureVerdict(VerifiableError):
    pass


class EmptyCorpus(VerifiableError):
    pass
