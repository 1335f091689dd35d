"""One app in, one report out; and the batch runner over a corpus."""

from __future__ import annotations

import functools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import PipelineConfig
from .errors import EmptyAnchors, ParseFailure, VerifiableError
from .ingest import AppPackage, iter_app_dirs, is_ble_app, load_app
from .pvlang import PiModel, QueryKind, inject_available
from .report import VulnReport, build_report
from .slicer import slice_app
from .translator import KnowledgeBase, LlmClient, OfflineClient, RemoteClient, translate_with_repair
from .verifier import Status, Verdict, verify_model

log = logging.getLogger(__name__)

KIND_OF_FEATURE = {"secrecy": QueryKind.SECRECY, "freshness": QueryKind.FRESHNESS,
                   "authentication": QueryKind.CORRESPONDENCE}


@functools.lru_cache(maxsize=4)
def load_kb(path: str | None) -> KnowledgeBase:
    return KnowledgeBase.load(path)


def make_client(cfg: PipelineConfig) -> LlmClient:
    if cfg.mode == "remote":
        return RemoteClient(cfg.endpoint, cfg.api_key, cfg.model_name, cfg.temperature,
                            cfg.request_timeout, cfg.request_concurrency)
    return OfflineClient()


def prepare_model(model: PiModel) -> tuple[PiModel, list[Verdict], list[str]]:
    """One query per feature: extra queries of a kind are dropped, missing ones added if possible.

    Features with nothing to query get a not-applicable verdict up front.
    """
    warnings, seen, queries = [], set(), []
    for q in model.queries:
        if q.kind in seen:
            warnings.append(f"dropped extra {q.kind.value} query {q.describe()}")
            continue
        seen.add(q.kind)
        queries.append(q)
    model, missing = inject_available(model.with_queries(queries))
    absent = [Verdict(f"{f}: no target", KIND_OF_FEATURE[f].value, Status.NOT_APPLICABLE,
                      detail="model has nothing this query could refer to") for f in missing]
    return model, absent, warnings


def analyze_app(app: AppPackage, cfg: PipelineConfig, client: LlmClient | None = None) -> VulnReport:
    """Slice, translate, verify, classify. Never raises for per-app problems."""
    try:
        sl, _ = slice_app(app, cfg.anchors, cfg.depth_cap)
    except (EmptyAnchors, ParseFailure) as e:
        return build_report(app, error=f"{type(e).__name__}: {e}", semantics=cfg.semantics)
    try:
        session = translate_with_repair(sl, cfg.max_retries, client or make_client(cfg),
                                        load_kb(cfg.kb_path), cfg.budget, cfg.top_k, cfg.few_shots)
    except VerifiableError as e:
        return build_report(app, error=f"{type(e).__name__}: {e}", semantics=cfg.semantics,
                            slice_methods=sl.names)
    if session.failed:
        return build_report(app, session, semantics=cfg.semantics, slice_methods=sl.names)
    model, absent, notes = prepare_model(session.final_model)
    verdicts = verify_model(model, cfg.verifier()) + absent
    report = build_report(app, session, verdicts, semantics=cfg.semantics, slice_methods=sl.names)
    report.warnings.extend(notes)
    return report


def report_path(out_dir: str | Path, report: VulnReport) -> Path:
    return Path(out_dir) / f"{report.key or report.app_id}.json"


def write_report(report: VulnReport, out_dir: str | Path) -> Path:
    path = report_path(out_dir, report)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.to_json(), encoding="utf-8")
    return path


def _analyze_dir(args) -> str:
    app_dir, cfg, client = args
    app = load_app(app_dir)
    return analyze_app(app, cfg, client).to_json()


def ble_app_dirs(corpus_dir: str | Path, cfg: PipelineConfig) -> list[Path]:
    """BLE app directories in (app_id, version, directory) order."""
    found = []
    for d in iter_app_dirs(corpus_dir):
        try:
            app = load_app(d)
        except VerifiableError as e:
            log.warning("skipping %s: %s", d.name, e)
            continue
        if is_ble_app(app, cfg.ble_tokens):
            found.append(((app.app_id, app.metadata.version_code, app.key), d))
    return [d for _, d in sorted(found)]


def run_batch(dirs: list[Path], cfg: PipelineConfig, client: LlmClient | None = None) -> list[VulnReport]:
    """Analyze every directory; output order follows ``dirs`` whatever the worker count."""
    workers = cfg.parallel
    if cfg.mode == "remote":
        workers = min(workers, cfg.request_concurrency)
    jobs = [(d, cfg, client) for d in dirs]
    if workers <= 1 or len(jobs) <= 1:
        texts = [_analyze_dir(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            texts = list(pool.map(_analyze_dir, jobs))
    return [VulnReport.from_dict(json.loads(t)) for t in texts]
