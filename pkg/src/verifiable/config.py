"""Pipeline settings: defaults, TOML file, environment, command-line flags (in rising priority)."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import VerifiableError
from .ingest import DEFAULT_BLE_TOKENS
from .slicer import DEFAULT_ANCHORS, DEFAULT_DEPTH_CAP
from .translator.prompt import DEFAULT_BUDGET
from .translator.session import DEFAULT_MAX_RETRIES
from .verifier.result import VerifierConfig


class ConfigError(VerifiableError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    # ingest / slicer
    ble_tokens: tuple[str, ...] = tuple(sorted(DEFAULT_BLE_TOKENS))
    anchors: tuple[str, ...] = tuple(sorted(DEFAULT_ANCHORS))
    depth_cap: int = DEFAULT_DEPTH_CAP
    decompiler: str | None = None
    # translator
    mode: str = "offline"
    endpoint: str | None = None
    api_key: str | None = field(default=None, repr=False)
    model_name: str = "default"
    temperature: float = 0.0
    budget: int = DEFAULT_BUDGET
    max_retries: int = DEFAULT_MAX_RETRIES
    kb_path: str | None = None
    top_k: int = 4
    few_shots: int = 2
    request_concurrency: int = 2
    request_timeout: float = 60.0
    # verifier
    engine: str = "builtin"
    session_bound: int = 2
    term_depth: int = 4
    state_cap: int = 1_000_000
    external_path: str | None = None
    verifier_timeout: float = 120.0
    # report / run
    output_dir: str = "report"
    semantics: str = "or"
    parallel: int = 1
    seed: int = 0

    def validate(self) -> "PipelineConfig":
        checks = [
            (self.mode in ("offline", "remote"), "mode must be offline or remote"),
            (self.engine in ("builtin", "external", "both"), "engine must be builtin, external or both"),
            (self.semantics in ("or", "and"), "semantics must be or/and"),
            (1 <= self.depth_cap <= 64, "depth_cap must be in 1..64"),
            (self.budget >= 1, "budget must be positive"),
            (0 <= self.max_retries <= 50, "max_retries must be in 0..50"),
            (1 <= self.top_k <= 64, "top_k must be in 1..64"),
            (0 <= self.few_shots <= 16, "few_shots must be in 0..16"),
            (1 <= self.request_concurrency <= 64, "request_concurrency must be in 1..64"),
            (0.0 <= self.temperature <= 2.0, "temperature must be in 0..2"),
            (1 <= self.session_bound <= 4, "session_bound must be in 1..4"),
            (1 <= self.term_depth <= 8, "term_depth must be in 1..8"),
            (self.state_cap >= 1, "state_cap must be positive"),
            (1 <= self.parallel <= 256, "parallel must be in 1..256"),
            (self.request_timeout > 0 and self.verifier_timeout > 0, "timeouts must be positive"),
            (bool(self.anchors), "anchors must not be empty"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    def verifier(self) -> VerifierConfig:
        return VerifierConfig(engine=self.engine, external_path=self.external_path,
                              session_bound=self.session_bound, term_depth=self.term_depth,
                              state_cap=self.state_cap, timeout=self.verifier_timeout)


FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}

# env var -> field; the two LLM variables keep their documented names
ENV_VARS = {
    "VERIFIABLE_LLM_URL": "endpoint",
    "VERIFIABLE_LLM_KEY": "api_key",
    "VERIFIABLE_MODE": "mode",
    "VERIFIABLE_ENGINE": "engine",
    "VERIFIABLE_PROVERIF": "external_path",
    "VERIFIABLE_KB": "kb_path",
    "VERIFIABLE_PARALLEL": "parallel",
    "VERIFIABLE_MAX_RETRIES": "max_retries",
    "VERIFIABLE_OUTPUT_DIR": "output_dir",
}

# TOML sections are for readability only; keys must be field names
SECTIONS = ("ingest", "slicer", "translator", "verifier", "report", "run")


def _coerce(name: str, value):
    typ = FIELD_TYPES[name]
    try:
        if "tuple" in typ:
            if isinstance(value, str):
                value = [v.strip() for v in value.split(",") if v.strip()]
            return tuple(str(v) for v in value)
        if typ.startswith("int"):
            if isinstance(value, bool):
                raise ValueError(value)
            return int(value)
        if typ.startswith("float"):
            return float(value)
        return None if value is None else str(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad value for {name}: {value!r}") from e


def _flatten(data: dict, origin: str) -> dict:
    out = {}
    for key, value in data.items():
        if isinstance(value, dict):
            if key not in SECTIONS:
                raise ConfigError(f"{origin}: unknown section [{key}]")
            out.update(_flatten(value, origin))
        elif key in FIELD_TYPES:
            out[key] = value
        else:
            raise ConfigError(f"{origin}: unknown setting {key!r}")
    return out


def read_file(path: str | Path) -> dict:
    p = Path(path)
    try:
        data = tomllib.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {p}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{p}: {e}") from e
    return _flatten(data, str(p))


def read_env(env=None) -> dict:
    env = os.environ if env is None else env
    return {name: env[var] for var, name in ENV_VARS.items() if env.get(var)}


def load_config(path: str | Path | None = None, env=None, overrides: dict | None = None) -> PipelineConfig:
    """Merge defaults < file < environment < ``overrides`` (flags); ``None`` overrides are ignored."""
    layers = [read_file(path) if path else {}, read_env(env),
              {k: v for k, v in (overrides or {}).items() if v is not None}]
    merged = {}
    for layer in layers:
        for k, v in layer.items():
            if k not in FIELD_TYPES:
                raise ConfigError(f"unknown setting {k!r}")
            merged[k] = _coerce(k, v)
    return replace(PipelineConfig(), **merged).validate()
