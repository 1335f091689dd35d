"""Token-family fingerprints and the protocol templates they select."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
CAMEL_RE = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|[0-9]+")

FAMILIES = {
    "crypto": frozenset({
        "cipher", "dofinal", "secretkeyspec", "aes", "des", "rsa", "encrypt", "decrypt",
        "encrypted", "decrypted", "encryption", "decryption", "keygenerator",
        "ivparameterspec", "gcmparameterspec", "crypto",
    }),
    "nonce": frozenset({
        "securerandom", "nextbytes", "nonce", "random", "randomuuid", "salt",
    }),
    "auth": frozenset({
        "challenge", "authenticate", "authentication", "authorize", "auth", "hmac",
        "signature", "verify", "handshake", "password", "passcode",
    }),
    "address": frozenset({"getaddress"}),
}

TEMPLATES = (
    "challenge_response", "enc_nonce", "enc_auth", "mac_key", "enc_only",
    "plain_auth", "nonce_plain", "plaintext",
)


@dataclass(frozen=True)
class Fingerprint:
    crypto: bool = False
    nonce: bool = False
    auth: bool = False
    address: bool = False

    def as_dict(self) -> dict:
        return {"crypto": self.crypto, "nonce": self.nonce, "auth": self.auth,
                "address": self.address}


def words(text: str) -> set[str]:
    """Lowercased identifiers plus their camel-case parts."""
    out = set()
    for ident in IDENT_RE.findall(text):
        out.add(ident.lower())
        out.update(p.lower() for part in ident.split("_") for p in CAMEL_RE.findall(part))
    return out


def fingerprint(text: str) -> Fingerprint:
    w = words(text)
    return Fingerprint(**{name: bool(w & toks) for name, toks in FAMILIES.items()})


def select_template(fp: Fingerprint) -> str:
    if fp.crypto:
        if fp.nonce and fp.auth:
            return "challenge_response"
        if fp.nonce:
            return "enc_nonce"
        if fp.auth:
            return "enc_auth"
        if fp.address:
            return "mac_key"
        return "enc_only"
    if fp.auth:
        return "plain_auth"
    if fp.nonce:
        return "nonce_plain"
    return "plaintext"


def template_dir() -> Path:
    return Path(str(resources.files("verifiable") / "data" / "templates"))


def load_template(name: str) -> str:
    if name not in TEMPLATES:
        raise KeyError(name)
    return (template_dir() / f"{name}.pv").read_text(encoding="utf-8")


def instantiate(name: str, fp: Fingerprint) -> str:
    flags = ", ".join(f"{k}={'yes' if v else 'no'}" for k, v in fp.as_dict().items())
    return f"(* template {name}.pv; {flags} *)\n" + load_template(name)
