"""Feature profiles, attack classification, per-app reports and corpus statistics."""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .errors import DuplicateFeatureVerdict, EmptyCorpus
from .ingest import DOWNLOAD_LABELS, UNKNOWN, AppPackage
from .verifier.result import Status, Verdict

FEATURES = ("encryption", "nonce", "authentication")
FEATURE_OF_KIND = {"secrecy": "encryption", "freshness": "nonce", "correspondence": "authentication"}

ATTACKS = ("eavesdropping", "traffic_analysis", "replay", "message_injection",
           "message_modification", "spoofing", "mitm")

# attack -> does it become possible without (encryption, nonce, authentication)
ATTACK_MATRIX: dict[str, tuple[bool, bool, bool]] = {
    "eavesdropping": (True, False, False),
    "traffic_analysis": (True, False, False),
    "replay": (False, True, False),
    "message_injection": (False, True, True),
    "message_modification": (False, True, True),
    "spoofing": (False, False, True),
    "mitm": (True, True, True),
}

# the four attacks broken out per group, plus the secure share
SHARE_COLUMNS = ("secure", "eavesdropping", "replay", "mitm", "spoofing")

# row order of the combination table: all features first, none last
COMBINATIONS = tuple((e, n, a) for e in (True, False) for n in (True, False) for a in (True, False))
# column order of the per-group tables: none first
GROUP_COMBINATIONS = tuple(reversed(COMBINATIONS))

DIMENSIONS = ("none", "category", "downloads", "rating_interval", "developer", "version")
RATING_INTERVALS = ("[0.0, 1.0)", "[1.0, 2.0)", "[2.0, 3.0)", "[3.0, 4.0)", "[4.0, 5.0]")

VERIFIED, VIOLATED, VACUOUS, NOT_APPLICABLE, UNKNOWN_PROV = (
    "verified", "violated", "vacuous", "not-applicable", "unknown")

_PROVENANCE = {
    Status.HOLDS: VERIFIED,
    Status.VIOLATED: VIOLATED,
    Status.VACUOUS: VACUOUS,
    Status.NOT_APPLICABLE: NOT_APPLICABLE,
    Status.UNKNOWN: UNKNOWN_PROV,
}


def combo_label(combo) -> str:
    return "".join("T" if x else "F" for x in combo)


# -- profiles and attacks ------------------------------------------------------

@dataclass(frozen=True)
class FeatureProfile:
    encryption: bool = False
    nonce: bool = False
    authentication: bool = False
    provenance: dict = field(default_factory=lambda: {f: UNKNOWN_PROV for f in FEATURES},
                             compare=False, hash=False)

    @property
    def key(self) -> tuple[bool, bool, bool]:
        return (self.encryption, self.nonce, self.authentication)

    @property
    def label(self) -> str:
        return combo_label(self.key)

    @classmethod
    def of(cls, encryption: bool, nonce: bool, authentication: bool) -> "FeatureProfile":
        flags = (encryption, nonce, authentication)
        return cls(*flags, provenance={f: VERIFIED if x else VIOLATED for f, x in zip(FEATURES, flags)})

    @classmethod
    def failed(cls) -> "FeatureProfile":
        return cls()

    def as_dict(self) -> dict:
        return {"encryption": self.encryption, "nonce": self.nonce,
                "authentication": self.authentication, "provenance": dict(self.provenance)}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureProfile":
        return cls(d["encryption"], d["nonce"], d["authentication"], dict(d.get("provenance", {})))


def derive_profile(verdicts: list[Verdict]) -> FeatureProfile:
    """A feature is present only when its query holds and the holding is not vacuous."""
    flags = {f: False for f in FEATURES}
    prov = {f: UNKNOWN_PROV for f in FEATURES}
    seen = set()
    for v in verdicts:
        feature = FEATURE_OF_KIND.get(v.kind)
        if feature is None:
            continue
        if feature in seen:
            raise DuplicateFeatureVerdict(f"more than one {v.kind} verdict")
        seen.add(feature)
        prov[feature] = _PROVENANCE[v.status]
        flags[feature] = v.status is Status.HOLDS
    return FeatureProfile(flags["encryption"], flags["nonce"], flags["authentication"], prov)


def classify_attacks(profile: FeatureProfile, matrix: dict | None = None,
                     semantics: str = "or") -> list[str]:
    """Attacks enabled by the missing features, in matrix row order.

    With "or" semantics an attack is flagged when any feature its row marks is
    missing; "and" requires all of them to be missing.
    """
    matrix = matrix or ATTACK_MATRIX
    missing = tuple(not x for x in profile.key)
    out = []
    for attack, needs in matrix.items():
        hits = [m for m, n in zip(missing, needs) if n]
        if not hits:
            continue
        if (any(hits) if semantics == "or" else all(hits)):
            out.append(attack)
    return out


# -- per-app report ----------------------------------------------------------------

@dataclass
class VulnReport:
    app_id: str
    profile: FeatureProfile
    attacks: list[str]
    verdicts: list[dict] = field(default_factory=list)
    traces: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    attempts: list[dict] = field(default_factory=list)
    pipeline_failure: bool = False
    metadata: dict = field(default_factory=dict)
    key: str = ""
    slice_methods: list[str] = field(default_factory=list)

    @property
    def secure(self) -> bool:
        return not self.attacks

    def as_dict(self) -> dict:
        return {
            "app_id": self.app_id,
            "key": self.key or self.app_id,
            "secure": self.secure,
            "pipeline_failure": self.pipeline_failure,
            "profile": self.profile.as_dict(),
            "attacks": list(self.attacks),
            "verdicts": self.verdicts,
            "traces": self.traces,
            "warnings": self.warnings,
            "attempts": self.attempts,
            "slice": self.slice_methods,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "VulnReport":
        return cls(d["app_id"], FeatureProfile.from_dict(d["profile"]), list(d["attacks"]),
                   d.get("verdicts", []), d.get("traces", []), d.get("warnings", []),
                   d.get("attempts", []), d.get("pipeline_failure", False), d.get("metadata", {}),
                   d.get("key", d["app_id"]), d.get("slice", []))


def build_report(app: AppPackage, session=None, verdicts: list[Verdict] | None = None,
                 error: str | None = None, matrix: dict | None = None,
                 semantics: str = "or", slice_methods: list[str] | None = None) -> VulnReport:
    """Always returns a report; failures show up as an all-absent profile plus a warning."""
    warnings = []
    if app.obfuscation_suspect:
        warnings.append("obfuscation suspected: most class names are a single character")
    attempts = []
    if session is not None:
        attempts = [{"attempt": i + 1, "diagnostics": [d.code for d in a.diagnostics]}
                    for i, a in enumerate(session.attempts)]
    failed = error is not None or verdicts is None or (session is not None and session.failed)
    if failed:
        reason = error or (session.error if session is not None and session.error else "no model")
        warnings.insert(0, f"PIPELINE FAILURE: {reason}; features reported as absent")
        profile = FeatureProfile.failed()
        verdict_dicts, traces = [], []
    else:
        profile = derive_profile(verdicts)
        verdict_dicts = [{k: x for k, x in v.as_dict().items() if k != "trace"} for v in verdicts]
        traces = [{"query": v.query, "kind": v.kind, "steps": v.trace.as_dict()["steps"]}
                  for v in verdicts if v.trace is not None]
        for v in verdicts:
            if v.status is Status.UNKNOWN:
                warnings.append(f"{v.kind} undecided ({v.detail or 'unknown'}); counted as absent")
            warnings.extend(f"{v.kind}: {w}" for w in v.warnings)
    return VulnReport(
        app.app_id, profile, classify_attacks(profile, matrix, semantics), verdict_dicts, traces,
        warnings, attempts, failed, app.metadata.as_dict(), app.key, list(slice_methods or []))


# -- corpus statistics -----------------------------------------------------------------

def pct(count: int, total: int) -> float:
    return round(100.0 * count / total, 2) if total else 0.0


def rating_interval(rating: float | None) -> str:
    if rating is None:
        return UNKNOWN
    return RATING_INTERVALS[min(int(rating), 4)]


def group_key(report: VulnReport, dimension: str) -> str:
    m = report.metadata
    if dimension == "none":
        return "all"
    if dimension == "category":
        return m.get("category") or UNKNOWN
    if dimension == "downloads":
        return m.get("downloads") or UNKNOWN
    if dimension == "rating_interval":
        return rating_interval(m.get("rating"))
    if dimension == "developer":
        return m.get("developer") or UNKNOWN
    if dimension == "version":
        return str(m.get("version", 0))
    raise ValueError(f"unknown dimension {dimension!r}; choose from {', '.join(DIMENSIONS)}")


def _group_order(dimension: str, keys) -> list[str]:
    keys = set(keys)
    if dimension == "downloads":
        fixed = [k for k in DOWNLOAD_LABELS if k in keys]
    elif dimension == "rating_interval":
        fixed = [k for k in RATING_INTERVALS if k in keys]
    elif dimension == "version":
        fixed = sorted((k for k in keys if k.isdigit()), key=int)
    else:
        fixed = sorted(k for k in keys if k != UNKNOWN)
    return fixed + sorted(keys - set(fixed))


@dataclass
class CorpusStats:
    total: int
    group_by: str
    combinations: list[dict]
    secure: int
    pipeline_failures: int
    prevalence: dict[str, float]
    groups: dict[str, dict] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"total": self.total, "group_by": self.group_by, "secure": self.secure,
                "secure_percent": pct(self.secure, self.total),
                "pipeline_failures": self.pipeline_failures, "combinations": self.combinations,
                "prevalence": self.prevalence, "groups": self.groups}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"


def _combination_rows(reports, order) -> list[dict]:
    counts = Counter(r.profile.key for r in reports)
    n = len(reports)
    return [{"encryption": c[0], "nonce": c[1], "authentication": c[2], "label": combo_label(c),
             "count": counts.get(c, 0), "percent": pct(counts.get(c, 0), n)} for c in order]


def attack_share(reports) -> dict[str, float]:
    """Secure apps and the four headline attacks as shares of all occurrences in the group."""
    counts = Counter()
    for r in reports:
        if r.secure:
            counts["secure"] += 1
        counts.update(a for a in r.attacks if a in SHARE_COLUMNS)
    total = sum(counts.values())
    return {c: pct(counts.get(c, 0), total) for c in SHARE_COLUMNS}


def aggregate_corpus(reports: list[VulnReport], group_by: str = "none") -> CorpusStats:
    if not reports:
        raise EmptyCorpus("no reports to aggregate")
    if group_by not in DIMENSIONS:
        raise ValueError(f"unknown dimension {group_by!r}; choose from {', '.join(DIMENSIONS)}")
    n = len(reports)
    attack_counts = Counter(a for r in reports for a in r.attacks)
    stats = CorpusStats(
        total=n, group_by=group_by,
        combinations=_combination_rows(reports, COMBINATIONS),
        secure=sum(r.secure for r in reports),
        pipeline_failures=sum(r.pipeline_failure for r in reports),
        prevalence={a: pct(attack_counts.get(a, 0), n) for a in ATTACKS},
    )
    if group_by != "none":
        buckets = defaultdict(list)
        for r in reports:
            buckets[group_key(r, group_by)].append(r)
        for g in _group_order(group_by, buckets):
            rs = buckets[g]
            stats.groups[g] = {
                "total": len(rs),
                "combinations": _combination_rows(rs, GROUP_COMBINATIONS),
                "share": attack_share(rs),
            }
    return stats


# -- text rendering ------------------------------------------------------------------

def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    line = lambda cells: "  ".join(str(c).rjust(w) if i else str(c).ljust(w)
                                   for i, (c, w) in enumerate(zip(cells, widths)))
    out = [line(header), "  ".join("-" * w for w in widths)]
    out += [line(r) for r in rows]
    return "\n".join(out)


def _mark(x: bool) -> str:
    return "Y" if x else "N"


def render_combinations(stats: CorpusStats) -> str:
    rows = [[_mark(r["encryption"]), _mark(r["nonce"]), _mark(r["authentication"]),
             str(r["count"]), f"{r['percent']:.2f}"] for r in stats.combinations]
    return _table(["Encryption", "Nonce", "Authentication", "Num. (#)", "Percent (%)"], rows)


def render_groups(stats: CorpusStats) -> str:
    if not stats.groups:
        return ""
    combo_head = [combo_label(c) for c in GROUP_COMBINATIONS]
    rows = []
    for g, data in stats.groups.items():
        cells = [f"{r['percent']:.2f}" if r["count"] else "--" for r in data["combinations"]]
        rows.append([g, str(data["total"])] + cells)
    out = [f"Feature combinations by {stats.group_by} (E/N/A, T = present)",
           _table([stats.group_by, "n"] + combo_head, rows), ""]
    rows = [[g] + [f"{data['share'][c]:.2f}" for c in SHARE_COLUMNS]
            for g, data in stats.groups.items()]
    out += [f"Secure and attack shares by {stats.group_by} (%)",
            _table([stats.group_by] + list(SHARE_COLUMNS), rows)]
    return "\n".join(out)


def render_stats(stats: CorpusStats) -> str:
    parts = [f"Apps: {stats.total}  secure: {stats.secure} ({pct(stats.secure, stats.total):.2f}%)"
             f"  pipeline failures: {stats.pipeline_failures}", "",
             render_combinations(stats), "",
             _table(["Attack", "Apps (%)"],
                    [[a, f"{p:.2f}"] for a, p in stats.prevalence.items()])]
    groups = render_groups(stats)
    if groups:
        parts += ["", groups]
    return "\n".join(parts) + "\n"


def version_evolution(reports: list[VulnReport]) -> dict[str, list[tuple[int, str]]]:
    """Per app, (version, state) in version order; state is secure, insecure or failed."""
    out = defaultdict(list)
    for r in reports:
        state = "failed" if r.pipeline_failure else "secure" if r.secure else "insecure"
        out[r.app_id].append((int(r.metadata.get("version", 0)), state))
    return {app: sorted(rows) for app, rows in sorted(out.items())}


def render_evolution(reports: list[VulnReport]) -> str:
    """One row per app, one column per version seen anywhere: S secure, X insecure, ? failed, blank gap."""
    evo = version_evolution(reports)
    versions = sorted({v for rows in evo.values() for v, _ in rows})
    symbol = {"secure": "S", "insecure": "X", "failed": "?"}
    rows = []
    for app, entries in evo.items():
        have = dict(entries)
        rows.append([app] + [symbol[have[v]] if v in have else "" for v in versions])
    return _table(["app"] + [f"v{v}" for v in versions], rows) + "\n"
