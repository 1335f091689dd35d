"""Command-line entry point: scan, analyze, batch, verify, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
from pathlib import Path

from .config import ConfigError, PipelineConfig, load_config
from .errors import EmptyCorpus, NotADirectory, VerifiableError
from .ingest import discover_corpus, load_app, run_decompiler
from .pipeline import analyze_app, ble_app_dirs, prepare_model, run_batch, write_report
from .pvlang import PvError, diagnose, parse_model
from .report import DIMENSIONS, VulnReport, aggregate_corpus, render_evolution, render_stats
from .translator import LlmClient
from .verifier import Status, verify_model

EXIT_OK, EXIT_INSECURE, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2, 3
CORPUS_FILE = "corpus.json"

# flag dest -> PipelineConfig field
FLAG_FIELDS = {
    "mode": "mode", "endpoint": "endpoint", "max_retries": "max_retries", "budget": "budget",
    "kb": "kb_path", "engine": "engine", "proverif": "external_path",
    "session_bound": "session_bound", "term_depth": "term_depth", "state_cap": "state_cap",
    "depth_cap": "depth_cap", "out": "output_dir", "parallel": "parallel", "seed": "seed",
    "decompiler": "decompiler", "semantics": "semantics",
}


def _err(msg: str) -> None:
    print(f"verifiable: {msg}", file=sys.stderr)


def _emit(data, as_json: bool, text: str) -> None:
    if as_json:
        print(json.dumps(data, indent=2, sort_keys=True))
    else:
        sys.stdout.write(text)


def cmd_scan(corpus_dir, cfg: PipelineConfig | None = None, as_json: bool = False) -> int:
    cfg = cfg or PipelineConfig()
    try:
        apps = discover_corpus(corpus_dir, cfg.ble_tokens)
    except NotADirectory as e:
        _err(f"not a directory: {e}")
        return EXIT_USAGE
    if not apps:
        _err(f"no BLE apps found under {corpus_dir}")
        return EXIT_USAGE
    rows = [{"app_id": a.app_id, "dir": a.key, "version": a.metadata.version_code,
             "category": a.metadata.category, "sources": len(a.source_units)} for a in apps]
    lines = [f"{r['app_id']}\tv{r['version']}\t{r['category']}\t{r['dir']}" for r in rows]
    _emit(rows, as_json, "\n".join(lines) + "\n")
    return EXIT_OK


def _resolve_app_dir(app_path: Path, cfg: PipelineConfig, tmp: str) -> Path:
    if app_path.is_file() and app_path.suffix == ".apk":
        if not cfg.decompiler:
            raise ConfigError("an .apk input needs a decompiler command (decompiler setting)")
        out = Path(tmp) / app_path.stem
        run_decompiler(cfg.decompiler, app_path, out)
        return out
    return app_path


def _summary(report: VulnReport) -> str:
    if report.pipeline_failure:
        return f"{report.app_id}: pipeline failure ({report.pipeline_failure})\n"
    lines = [f"{report.app_id}: {report.profile.label}"]
    lines.append("secure" if report.secure else "attacks: " + ", ".join(report.attacks))
    lines += [f"warning: {w}" for w in report.warnings]
    return "\n".join(lines) + "\n"


def cmd_analyze(app_dir, cfg: PipelineConfig | None = None, client: LlmClient | None = None,
                as_json: bool = False) -> int:
    cfg = cfg or PipelineConfig()
    with tempfile.TemporaryDirectory() as tmp:
        try:
            app = load_app(_resolve_app_dir(Path(app_dir), cfg, tmp))
        except (VerifiableError, OSError) as e:
            _err(f"{type(e).__name__}: {e}")
            return EXIT_USAGE
        report = analyze_app(app, cfg, client)
    path = write_report(report, cfg.output_dir)
    _emit(report.as_dict(), as_json, _summary(report) + f"report: {path}\n")
    if report.pipeline_failure:
        return EXIT_FAILURE
    return EXIT_OK if report.secure else EXIT_INSECURE


def cmd_batch(corpus_dir, cfg: PipelineConfig | None = None, client: LlmClient | None = None,
              as_json: bool = False, group_by: str = "none") -> int:
    cfg = cfg or PipelineConfig()
    try:
        dirs = ble_app_dirs(corpus_dir, cfg)
    except NotADirectory as e:
        _err(f"not a directory: {e}")
        return EXIT_USAGE
    if not dirs:
        _err(f"no BLE apps found under {corpus_dir}")
        return EXIT_USAGE
    reports = run_batch(dirs, cfg, client)
    for r in reports:
        write_report(r, cfg.output_dir)
    stats = aggregate_corpus(reports, group_by)
    out = Path(cfg.output_dir) / CORPUS_FILE
    out.write_text(stats.to_json(), encoding="utf-8")
    _emit(stats.as_dict(), as_json, render_stats(stats) + f"\n{len(reports)} reports in {cfg.output_dir}\n")
    return EXIT_OK


def cmd_verify(model_file, cfg: PipelineConfig | None = None, as_json: bool = False) -> int:
    cfg = cfg or PipelineConfig()
    try:
        text = Path(model_file).read_text(encoding="utf-8")
    except OSError as e:
        _err(str(e))
        return EXIT_USAGE
    try:
        model = parse_model(text)
    except PvError:
        diags = diagnose(text)
        _emit([d.as_dict() for d in diags], as_json, "\n".join(str(d) for d in diags) + "\n")
        return EXIT_USAGE
    model, absent, notes = prepare_model(model)
    try:
        verdicts = verify_model(model, cfg.verifier()) + absent
    except VerifiableError as e:
        _err(f"{type(e).__name__}: {e}")
        return EXIT_FAILURE
    lines = [f"warning: {n}" for n in notes]
    for v in verdicts:
        lines.append(f"{v.kind:<15} {v.status.value:<15} {v.query}")
        lines += [f"  warning: {w}" for w in v.warnings]
        if v.trace is not None:
            lines.append(f"  attack trace ({v.trace.goal}):")
            lines += ["    " + s for s in str(v.trace).splitlines()]
    _emit({"verdicts": [v.as_dict() for v in verdicts], "warnings": notes}, as_json,
          "\n".join(lines) + "\n")
    statuses = {v.status for v in verdicts}
    if Status.VIOLATED in statuses:
        return EXIT_INSECURE
    if Status.UNKNOWN in statuses:
        return EXIT_FAILURE
    return EXIT_OK


def load_reports(report_dir) -> list[VulnReport]:
    d = Path(report_dir)
    if not d.is_dir():
        raise NotADirectory(str(d))
    paths = sorted(p for p in d.glob("*.json") if p.name != CORPUS_FILE)
    return [VulnReport.from_dict(json.loads(p.read_text(encoding="utf-8"))) for p in paths]


def cmd_report(report_dir, group_by: str = "none", evolution: bool = False,
               as_json: bool = False) -> int:
    try:
        reports = load_reports(report_dir)
        stats = aggregate_corpus(reports, group_by)
    except NotADirectory as e:
        _err(f"not a directory: {e}")
        return EXIT_USAGE
    except EmptyCorpus:
        _err(f"no reports under {report_dir}")
        return EXIT_USAGE
    except (ValueError, KeyError) as e:
        _err(f"unreadable report: {e}")
        return EXIT_USAGE
    text = render_stats(stats)
    if evolution:
        text += "\n" + render_evolution(reports)
    _emit(stats.as_dict(), as_json, text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    # SUPPRESS lets these appear before or after the subcommand
    g.add_argument("--config", default=argparse.SUPPRESS, help="TOML config file")
    g.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                   help="machine-readable output")
    g.add_argument("--parallel", type=int, metavar="N", default=argparse.SUPPRESS,
                   help="worker processes for batch")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help="seed for any randomized behavior")
    g.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    pipe = argparse.ArgumentParser(add_help=False)
    p = pipe.add_argument_group("pipeline options")
    p.add_argument("--mode", choices=("offline", "remote"))
    p.add_argument("--endpoint", help="LLM endpoint URL (remote mode)")
    p.add_argument("--max-retries", type=int)
    p.add_argument("--budget", type=int, help="prompt size budget in characters")
    p.add_argument("--kb", help="knowledge base directory")
    p.add_argument("--depth-cap", type=int)
    p.add_argument("--decompiler", help='command for .apk inputs, e.g. "jadx -d {out} {apk}"')
    p.add_argument("--out", help="report output directory")
    p.add_argument("--semantics", choices=("or", "and"))

    ver = argparse.ArgumentParser(add_help=False)
    v = ver.add_argument_group("verifier options")
    v.add_argument("--engine", choices=("builtin", "external", "both"))
    v.add_argument("--proverif", help="path to the proverif binary")
    v.add_argument("--session-bound", type=int)
    v.add_argument("--term-depth", type=int)
    v.add_argument("--state-cap", type=int)

    grouping = argparse.ArgumentParser(add_help=False)
    grouping.add_argument("--group-by", choices=DIMENSIONS, default="none")

    parser = argparse.ArgumentParser(prog="verifiable", parents=[common],
                                     description="Audit BLE app code for protocol-level flaws.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    s = sub.add_parser("scan", parents=[common], help="list BLE apps in a corpus")
    s.add_argument("corpus_dir")
    a = sub.add_parser("analyze", parents=[common, pipe, ver], help="run the pipeline on one app")
    a.add_argument("app_dir")
    b = sub.add_parser("batch", parents=[common, pipe, ver, grouping],
                       help="analyze a corpus and aggregate")
    b.add_argument("corpus_dir")
    vf = sub.add_parser("verify", parents=[common, ver], help="verify a standalone .pv model")
    vf.add_argument("model_file")
    r = sub.add_parser("report", parents=[common, grouping], help="aggregate a report directory")
    r.add_argument("report_dir")
    r.add_argument("--evolution", action="store_true", help="per-app security across versions")
    return parser


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {field: getattr(args, dest) for dest, field in FLAG_FIELDS.items()
                 if hasattr(args, dest)}
    return load_config(getattr(args, "config", None), overrides=overrides)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except ConfigError as e:
        _err(str(e))
        return EXIT_USAGE
    as_json = getattr(args, "json", False)
    if args.command == "scan":
        return cmd_scan(args.corpus_dir, cfg, as_json)
    if args.command == "analyze":
        return cmd_analyze(args.app_dir, cfg, as_json=as_json)
    if args.command == "batch":
        return cmd_batch(args.corpus_dir, cfg, as_json=as_json, group_by=args.group_by)
    if args.command == "verify":
        return cmd_verify(args.model_file, cfg, as_json)
    return cmd_report(args.report_dir, args.group_by, args.evolution, as_json)


if __name__ == "__main__":
    sys.exit(main())
