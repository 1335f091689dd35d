import os
import shutil
import time
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from oracle import oracle_verdicts, random_model
from verifiable.errors import ExternalParseError, ExternalToolNotFound
from verifiable.pvlang import parse_model
from verifiable.translator.templates import load_template
from verifiable.verifier import (
    Status, VerifierConfig, parse_results, replay, run_external, verify_builtin, verify_model,
)

ORACLE_MODELS = 200

# template -> (secrecy, correspondence, freshness)
CANONICAL = {
    "plaintext": ("violated", "violated", "violated"),
    "enc_only": ("holds", "vacuous", "violated"),            # static key
    "enc_nonce": ("holds", "vacuous", "holds"),
    "challenge_response": ("holds", "holds", "holds"),
    "mac_key": ("violated", "violated", "violated"),        # key derived from a public address
    "enc_auth": ("holds", "holds", "violated"),             # nonce-less replayable command
    "plain_auth": ("violated", "violated", "violated"),
    "nonce_plain": ("violated", "vacuous", "holds"),
}


def statuses(verdicts):
    return tuple(v.status.value for v in verdicts)


def test_oracle_equivalence():
    start = time.monotonic()
    mismatches = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed in range(ORACLE_MODELS):
            text, bound = random_model(seed)
            got = statuses(verify_builtin(parse_model(text), VerifierConfig(session_bound=bound)))
            want = oracle_verdicts(text, bound)
            if got != want:
                mismatches.append((seed, got, want))
    assert mismatches == []
    assert time.monotonic() - start < 60


@pytest.mark.parametrize("name", sorted(CANONICAL))
def test_canonical_matrix(name):
    start = time.monotonic()
    m = parse_model(load_template(name))
    verdicts = verify_model(m)
    assert statuses(verdicts) == CANONICAL[name]
    for q, v in zip(m.queries, verdicts):
        assert (v.trace is not None) == (v.status is Status.VIOLATED)
        if v.trace is not None:
            assert replay(m, q, v.trace).ok
    assert time.monotonic() - start < 5


def test_replayable_command_trace_repeats_one_output():
    m = parse_model(load_template("enc_auth"))
    fresh = verify_model(m)[2]
    assert fresh.status is Status.VIOLATED
    accepts = [s for s in fresh.trace.steps if s.action == "event" and str(s.term).startswith("accept(")]
    assert len(accepts) == 2
    assert {s.session_id for s in accepts} == {1, 2}
    # the second session accepts a message the attacker saw in the first
    assert any("replays output #1" in s.justification for s in fresh.trace.steps if s.session_id == 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_traces_replay(seed):
    text, bound = random_model(seed)
    m = parse_model(text)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for q, v in zip(m.queries, verify_builtin(m, VerifierConfig(session_bound=bound))):
            if v.trace is not None:
                assert replay(m, q, v.trace, session_bound=bound).ok


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_more_sessions_only_add_attacks(seed):
    text, _ = random_model(seed)
    m = parse_model(text)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        one = verify_builtin(m, VerifierConfig(session_bound=1))
        two = verify_builtin(m, VerifierConfig(session_bound=2))
    for a, b in zip(one, two):
        if a.status is Status.VIOLATED:
            assert b.status is Status.VIOLATED


def test_state_cap_gives_unknown():
    m = parse_model(load_template("challenge_response"))
    verdicts = verify_model(m, VerifierConfig(state_cap=3))
    assert Status.UNKNOWN in {v.status for v in verdicts}


def test_verdict_dict_shape():
    v = verify_model(parse_model(load_template("plaintext")))[0]
    d = v.as_dict()
    assert d["status"] == "violated" and d["trace"]["steps"]


# -- external backend, exercised through stand-in scripts ----------------------

def fake_proverif(tmp_path, stdout: str, code: int = 0):
    script = tmp_path / "proverif"
    script.write_text(f"#!/bin/sh\ncat <<'EOF'\n{stdout}\nEOF\necho oops >&2\nexit {code}\n")
    script.chmod(0o755)
    return str(script)


def test_parse_results():
    out = parse_results("junk\nRESULT not attacker(cmd[]) is true.\n"
                        "RESULT event(end_auth(x)) ==> event(begin_auth(x)) is false.\n")
    assert [s for _, s in out] == [Status.HOLDS, Status.VIOLATED]
    with pytest.raises(ExternalParseError):
        parse_results("nothing here")


def test_run_external_with_stand_in(tmp_path):
    exe = fake_proverif(tmp_path, "RESULT not attacker(cmd[]) is true.\n"
                                  "RESULT event(end_auth(x)) ==> event(begin_auth(x)) is cannot be proved.")
    m = parse_model(load_template("enc_auth"))
    verdicts = verify_model(m, VerifierConfig(engine="external", external_path=exe))
    assert statuses(verdicts) == ("holds", "unknown", "violated")
    assert [v.engine for v in verdicts] == ["external", "external", "builtin"]


def test_external_failure_carries_stderr(tmp_path):
    exe = fake_proverif(tmp_path, "Error: syntax", code=2)
    with pytest.raises(ExternalParseError) as info:
        run_external(parse_model(load_template("plaintext")), VerifierConfig(external_path=exe))
    assert "oops" in info.value.stderr


def test_external_missing_binary(tmp_path):
    cfg = VerifierConfig(engine="external", external_path=str(tmp_path / "none"), fallback=False)
    with pytest.raises(ExternalToolNotFound):
        verify_model(parse_model(load_template("plaintext")), cfg)
    cfg.fallback = True
    verdicts = verify_model(parse_model(load_template("plaintext")), cfg)
    assert statuses(verdicts) == CANONICAL["plaintext"]
    assert all("unavailable" in v.warnings[-1] for v in verdicts)


def test_both_engines_flag_disagreement(tmp_path):
    exe = fake_proverif(tmp_path, "RESULT not attacker(cmd[]) is false.\n"
                                  "RESULT event(end_auth(x)) ==> event(begin_auth(x)) is true.")
    m = parse_model(load_template("enc_auth"))
    verdicts = verify_model(m, VerifierConfig(engine="both", external_path=exe))
    assert statuses(verdicts) == CANONICAL["enc_auth"]
    assert any("external verifier says violated" in w for w in verdicts[0].warnings)
    assert not verdicts[1].warnings


PROVERIF = os.environ.get("VERIFIABLE_PROVERIF") or shutil.which("proverif")


@pytest.mark.external
@pytest.mark.skipif(PROVERIF is None, reason="proverif not installed")
@pytest.mark.parametrize("name", sorted(CANONICAL))
def test_external_agrees_on_canonical_models(name):
    m = parse_model(load_template(name))
    ext = verify_model(m, VerifierConfig(engine="external", external_path=PROVERIF, fallback=False))
    assert statuses(ext)[:2] == CANONICAL[name][:2]
