"""Adapter for an installed ProVerif binary."""

from __future__ import annotations

import os
import re
import shutil
import subprocess
import tempfile

from ..errors import ExternalParseError, ExternalToolNotFound
from ..pvlang.ast import Event, PiModel, QueryKind, subprocesses
from ..pvlang.render import render
from .result import Status, Verdict, VerifierConfig

RESULT_RE = re.compile(r"^RESULT\s+(?P<query>.*?)\s+(?P<verdict>is true|is false|cannot be proved)\.?\s*$")


def find_proverif(path: str | None = None) -> str:
    if path:
        if os.path.isfile(path) and os.access(path, os.X_OK):
            return path
        found = shutil.which(path)
        if found:
            return found
        raise ExternalToolNotFound(f"no executable at {path}")
    found = shutil.which("proverif")
    if not found:
        raise ExternalToolNotFound("proverif not found on PATH")
    return found


def parse_results(stdout: str, stderr: str = "") -> list[tuple[str, Status]]:
    out = []
    for line in stdout.splitlines():
        m = RESULT_RE.match(line.strip())
        if not m:
            continue
        v = m.group("verdict")
        status = {"is true": Status.HOLDS, "is false": Status.VIOLATED}.get(v, Status.UNKNOWN)
        out.append((m.group("query"), status))
    if not out:
        raise ExternalParseError("no RESULT lines in proverif output", stdout, stderr)
    return out


def run_external(model: PiModel, config: VerifierConfig | None = None) -> list[Verdict]:
    """Verdicts for the secrecy and correspondence queries of ``model``.

    Freshness queries are not understood by ProVerif and are skipped here.
    """
    cfg = config or VerifierConfig()
    binary = find_proverif(cfg.external_path)
    queries = [q for q in model.queries if q.kind is not QueryKind.FRESHNESS]
    if not queries:
        return []
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.pv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(render(model))
        try:
            proc = subprocess.run([binary, path], capture_output=True, text=True,
                                  timeout=cfg.timeout)
        except FileNotFoundError as e:
            raise ExternalToolNotFound(str(e)) from e
        except subprocess.TimeoutExpired as e:
            return [Verdict(q.describe(), q.kind.value, Status.UNKNOWN, engine="external",
                            detail=f"timed out after {e.timeout}s") for q in queries]
    if proc.returncode != 0 and "RESULT" not in proc.stdout:
        raise ExternalParseError(f"proverif exited with status {proc.returncode}",
                                 proc.stdout, proc.stderr)
    results = parse_results(proc.stdout, proc.stderr)
    if len(results) != len(queries):
        raise ExternalParseError(
            f"expected {len(queries)} RESULT lines, got {len(results)}", proc.stdout, proc.stderr)
    emitted = {p.name for p in subprocesses(model.main_process) if isinstance(p, Event)}
    verdicts = []
    for q, (_, status) in zip(queries, results):
        if (q.kind is QueryKind.CORRESPONDENCE and status is Status.HOLDS
                and q.end_event not in emitted):
            status = Status.VACUOUS
        verdicts.append(Verdict(q.describe(), q.kind.value, status, engine="external"))
    return verdicts
