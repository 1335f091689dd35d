"""Loading decompiled app trees and picking out the BLE apps in a corpus.

Corpus layout::

    <corpus>/<app_dir>/src/**/*.java
    <corpus>/<app_dir>/metadata      key=value sidecar (optional)
    <corpus>/<app_dir>/manifest      one permission per line (optional)
"""

from __future__ import annotations

import datetime as _dt
import logging
import re
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import DecompilerFailed, MalformedMetadata, NoSourcesFound, NotADirectory

log = logging.getLogger(__name__)

UNKNOWN = "unknown"

# Download brackets, lowest first; each entry is (label, inclusive lower bound).
DOWNLOAD_BUCKETS: tuple[tuple[str, int], ...] = (
    ("1-50+", 0),
    ("100-500+", 100),
    ("1000+", 1_000),
    ("5000+", 5_000),
    ("10000-50000+", 10_000),
    ("100000-500000+", 100_000),
    ("1000000+", 1_000_000),
)
DOWNLOAD_LABELS = tuple(label for label, _ in DOWNLOAD_BUCKETS)

DEFAULT_BLE_TOKENS = frozenset({"connectGatt", "onLeScan", "startLeScan", "BluetoothLeScanner"})
BLUETOOTH_PERMISSIONS = frozenset({
    "android.permission.BLUETOOTH",
    "android.permission.BLUETOOTH_ADMIN",
    "android.permission.BLUETOOTH_CONNECT",
    "android.permission.BLUETOOTH_SCAN",
    "android.permission.BLUETOOTH_ADVERTISE",
})

SOURCE_SUFFIXES = (".java",)
_SIDECAR_KEYS = {"category", "downloads", "rating", "developer", "version", "released", "package"}


@dataclass(frozen=True)
class SourceUnit:
    path: str
    text: str
    class_name: str


@dataclass(frozen=True)
class AppMetadata:
    category: str = UNKNOWN
    downloads_bucket: str = UNKNOWN
    rating: float | None = None
    developer: str = UNKNOWN
    version_code: int = 0
    release_date: _dt.date | None = None

    def __post_init__(self):
        if self.downloads_bucket not in DOWNLOAD_LABELS and self.downloads_bucket != UNKNOWN:
            raise ValueError(f"bad downloads bucket {self.downloads_bucket!r}")
        if self.rating is not None and not 0.0 <= self.rating <= 5.0:
            raise ValueError(f"rating {self.rating} outside [0, 5]")
        if self.version_code < 0:
            raise ValueError("version_code must be >= 0")

    def as_dict(self) -> dict:
        return {
            "category": self.category,
            "downloads": self.downloads_bucket,
            "rating": self.rating,
            "developer": self.developer,
            "version": self.version_code,
            "released": self.release_date.isoformat() if self.release_date else None,
        }


@dataclass(frozen=True)
class AppPackage:
    app_id: str
    source_units: tuple[SourceUnit, ...]
    metadata: AppMetadata = field(default_factory=AppMetadata)
    manifest_permissions: frozenset[str] = frozenset()
    # Directory name inside the corpus; differs from app_id when the sidecar
    # names the package explicitly (several versions of one app).
    key: str = ""

    def __post_init__(self):
        if not self.app_id:
            raise ValueError("app_id must be non-empty")
        paths = [u.path for u in self.source_units]
        if len(paths) != len(set(paths)):
            raise ValueError(f"duplicate source paths in {self.app_id}")
        if not self.key:
            object.__setattr__(self, "key", self.app_id)

    @property
    def obfuscation_suspect(self) -> bool:
        """More than half of the class names are a single character."""
        names = [u.class_name for u in self.source_units]
        if not names:
            return False
        short = sum(1 for n in names if len(n) == 1)
        return short / len(names) > 0.5


def class_name_for(path: str) -> str:
    return Path(path).stem


def bucket_downloads(value: str | int) -> str:
    """Map a raw download count (``5000``, ``"5,000+"``) or a bucket label to a label."""
    if isinstance(value, str):
        text = value.strip()
        if text in DOWNLOAD_LABELS:
            return text
        digits = text.replace(",", "").replace("_", "").rstrip("+").strip()
        if "-" in digits:
            digits = digits.split("-", 1)[0]
        if not digits.isdigit():
            raise ValueError(f"cannot interpret downloads value {value!r}")
        count = int(digits)
    else:
        count = int(value)
    if count < 0:
        raise ValueError("negative download count")
    label = DOWNLOAD_LABELS[0]
    for name, lower in DOWNLOAD_BUCKETS:
        if count >= lower:
            label = name
    return label


def parse_sidecar(text: str, origin: str = "<metadata>") -> tuple[AppMetadata, str | None]:
    """Parse a ``key=value`` sidecar. Returns the metadata and an optional package override."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise MalformedMetadata(f"{origin}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key not in _SIDECAR_KEYS:
            log.debug("%s:%d: ignoring unknown key %r", origin, lineno, key)
            continue
        values[key] = value.strip()

    try:
        rating = float(values["rating"]) if values.get("rating") else None
        version = int(values["version"]) if values.get("version") else 0
        released = _dt.date.fromisoformat(values["released"]) if values.get("released") else None
        downloads = bucket_downloads(values["downloads"]) if values.get("downloads") else UNKNOWN
        meta = AppMetadata(
            category=values.get("category") or UNKNOWN,
            downloads_bucket=downloads,
            rating=rating,
            developer=values.get("developer") or UNKNOWN,
            version_code=version,
            release_date=released,
        )
    except ValueError as exc:
        raise MalformedMetadata(f"{origin}: {exc}") from exc
    return meta, values.get("package") or None


def _read_manifest(path: Path) -> frozenset[str]:
    perms = set()
    text = path.read_text(encoding="utf-8")
    # Accept either a plain list or a real AndroidManifest.xml.
    for match in re.finditer(r'android:name="([^"]+)"', text):
        perms.add(match.group(1))
    if not perms:
        for line in text.splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                perms.add(line)
    return frozenset(perms)


def run_decompiler(command: str, apk: Path, out_dir: Path) -> None:
    """Optional hook: run an external decompiler, e.g. ``"jadx -d {out} {apk}"``."""
    argv = [a.format(apk=str(apk), out=str(out_dir)) for a in shlex.split(command)]
    try:
        subprocess.run(argv, check=True, capture_output=True)
    except FileNotFoundError as exc:
        raise DecompilerFailed(f"decompiler not found: {argv[0]}") from exc
    except subprocess.CalledProcessError as exc:
        err = exc.stderr.decode("utf-8", errors="replace").strip()[-500:]
        raise DecompilerFailed(f"decompiler exited with status {exc.returncode}: {err}") from exc


def load_app(root_dir: str | Path) -> AppPackage:
    root = Path(root_dir)
    if not root.is_dir():
        raise NotADirectory(str(root))

    src_root = root / "src" if (root / "src").is_dir() else root
    files = sorted(p for p in src_root.rglob("*") if p.is_file() and p.suffix in SOURCE_SUFFIXES)
    if not files:
        raise NoSourcesFound(str(root))

    units = []
    for p in files:
        rel = p.relative_to(src_root).as_posix()
        text = p.read_bytes().decode("utf-8", errors="replace")
        units.append(SourceUnit(path=rel, text=text, class_name=class_name_for(rel)))

    package = None
    meta_path = root / "metadata"
    if meta_path.is_file():
        meta, package = parse_sidecar(meta_path.read_text(encoding="utf-8"), str(meta_path))
    else:
        meta = AppMetadata()

    manifest = root / "manifest"
    if not manifest.is_file():
        manifest = root / "AndroidManifest.xml"
    perms = _read_manifest(manifest) if manifest.is_file() else frozenset()

    return AppPackage(
        app_id=package or root.name,
        source_units=tuple(units),
        metadata=meta,
        manifest_permissions=perms,
        key=root.name,
    )


def _token_in(text: str, token: str) -> bool:
    return re.search(rf"(?<![A-Za-z0-9_]){re.escape(token)}(?![A-Za-z0-9_])", text) is not None


def is_ble_app(app: AppPackage, tokens: Iterable[str] = DEFAULT_BLE_TOKENS,
               permissions: Iterable[str] = BLUETOOTH_PERMISSIONS) -> bool:
    # OR semantics: either an API token or a Bluetooth permission qualifies.
    if app.manifest_permissions & frozenset(permissions):
        return True
    tokens = tuple(tokens)
    return any(_token_in(unit.text, tok) for unit in app.source_units for tok in tokens)


def iter_app_dirs(corpus_dir: str | Path) -> list[Path]:
    corpus = Path(corpus_dir)
    if not corpus.is_dir():
        raise NotADirectory(str(corpus))
    return sorted(p for p in corpus.iterdir() if p.is_dir())


def discover_corpus(corpus_dir: str | Path, tokens: Iterable[str] = DEFAULT_BLE_TOKENS,
                    tolerant: bool = True) -> list[AppPackage]:
    """Load every app under ``corpus_dir`` and keep the BLE ones, sorted by app_id."""
    tokens = tuple(tokens)
    found = []
    for app_dir in iter_app_dirs(corpus_dir):
        try:
            app = load_app(app_dir)
        except (NoSourcesFound, MalformedMetadata) as exc:
            if not tolerant:
                raise
            log.warning("skipping %s: %s", app_dir.name, exc)
            continue
        if is_ble_app(app, tokens):
            found.append(app)
    found.sort(key=lambda a: (a.app_id, a.metadata.version_code, a.key))
    return found
