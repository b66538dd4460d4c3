"""Hash-chain audit log: canonical form, chaining, tamper detection, replay."""

import dataclasses
import hashlib
import json
import random

import pytest

from siovsim.audit import (
    GENESIS_HASH,
    AuditLog,
    AuditRecord,
    RecordKind,
    canonical_json,
    digest,
    load_records,
    replay_decisions,
    verify_chain,
)
from siovsim.errors import IntegrityError


def _filled_log(n=3):
    log = AuditLog()
    for i in range(n):
        log.append(
            RecordKind.DECISION,
            logical_time=i * 10,
            intermediates={"candidates": [], "note": f"record {i}"},
            rulebase_version=1,
            chosen=f"action-{i}",
        )
    return log


# -- canonical serialization -------------------------------------------------


def test_canonical_json_is_sorted_and_minimal():
    assert canonical_json({"b": 1, "a": [1.5, None, True]}) == \
        '{"a":[1.5,null,true],"b":1}'


def test_canonical_json_insertion_order_irrelevant():
    assert canonical_json({"x": 1, "y": 2}) == canonical_json({"y": 2, "x": 1})


def test_canonical_json_rejects_nan():
    with pytest.raises(ValueError):
        canonical_json({"v": float("nan")})


def test_canonical_json_escapes_non_ascii():
    assert canonical_json({"s": "café"}) == '{"s":"caf\\u00e9"}'


def test_digest_is_sha256_of_canonical_form():
    value = {"k": [1, 2, 3]}
    expected = hashlib.sha256(canonical_json(value).encode()).hexdigest()
    assert digest(value) == expected
    assert len(digest(value)) == 64


# -- appending ----------------------------------------------------------------


def test_empty_log_head_is_genesis():
    log = AuditLog()
    assert log.head_hash == GENESIS_HASH
    assert GENESIS_HASH == "0" * 64


def test_append_links_records():
    log = _filled_log(3)
    assert [r.sequence for r in log.records] == [0, 1, 2]
    assert log.records[0].prev_hash == GENESIS_HASH
    assert log.records[1].prev_hash == log.records[0].this_hash
    assert log.records[2].prev_hash == log.records[1].this_hash
    assert log.head_hash == log.records[2].this_hash
    for record in log.records:
        assert record.this_hash == record.compute_hash()


def test_append_defaults_inputs_digest_to_intermediates_digest():
    log = AuditLog()
    record = log.append(
        RecordKind.PREEMPTION,
        logical_time=4,
        intermediates={"signal": "sig-1"},
        rulebase_version=2,
    )
    assert record.inputs_digest == digest({"signal": "sig-1"})
    assert record.chosen is None


def test_append_record_accepts_only_valid_extensions():
    log = _filled_log(2)
    good = AuditRecord(
        sequence=2,
        logical_time=99,
        record_kind=RecordKind.ATTACK_OBSERVATION,
        inputs_digest="",
        intermediates={},
        rulebase_version=1,
        chosen=None,
        prev_hash=log.head_hash,
    )
    good = dataclasses.replace(good, this_hash=good.compute_hash())
    log.append_record(good)
    assert log.records[-1] is good

    with pytest.raises(IntegrityError):
        log.append_record(good)  # same record again: stale prev_hash
    bad_seq = dataclasses.replace(good, sequence=7, prev_hash=log.head_hash)
    bad_seq = dataclasses.replace(bad_seq, this_hash=bad_seq.compute_hash())
    with pytest.raises(IntegrityError):
        log.append_record(bad_seq)
    bad_hash = dataclasses.replace(
        good, sequence=3, prev_hash=log.head_hash, this_hash="f" * 64
    )
    with pytest.raises(IntegrityError):
        log.append_record(bad_hash)


def test_identical_appends_yield_identical_bytes():
    assert _filled_log(5).to_bytes() == _filled_log(5).to_bytes()


def test_to_bytes_is_json_lines():
    data = _filled_log(2).to_bytes()
    assert data.endswith(b"\n")
    lines = data.decode().splitlines()
    assert len(lines) == 2
    for line in lines:
        payload = json.loads(line)
        assert payload["record_kind"] == "Decision"
        assert set(payload) == {
            "sequence", "logical_time", "record_kind", "inputs_digest",
            "intermediates", "rulebase_version", "chosen", "prev_hash",
            "this_hash",
        }
        # the line is already in canonical form
        assert json.dumps(payload, sort_keys=True,
                          separators=(",", ":")) == line


# -- verification ---------------------------------------------------------------


def test_verify_empty_log():
    verdict = verify_chain(b"")
    assert verdict.intact
    assert verdict.record_count == 0
    assert bool(verdict)


def test_verify_intact_chain():
    verdict = verify_chain(_filled_log(4).to_bytes())
    assert verdict.intact
    assert verdict.first_break is None
    assert verdict.record_count == 4


def test_verify_flags_edited_field():
    log = _filled_log(3)
    lines = log.to_bytes().decode().splitlines()
    payload = json.loads(lines[1])
    payload["chosen"] = "doctored"
    lines[1] = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    verdict = verify_chain(("\n".join(lines) + "\n").encode())
    assert not verdict.intact
    assert verdict.first_break == 1


def test_verify_flags_reordered_records():
    lines = _filled_log(3).to_bytes().decode().splitlines()
    lines[0], lines[1] = lines[1], lines[0]
    verdict = verify_chain(("\n".join(lines) + "\n").encode())
    assert not verdict.intact
    assert verdict.first_break == 0


def test_verify_flags_unparseable_line():
    data = _filled_log(2).to_bytes() + b"this is not json\n"
    verdict = verify_chain(data)
    assert not verdict.intact
    assert verdict.first_break == 2


def test_verify_flags_deleted_record():
    lines = _filled_log(3).to_bytes().decode().splitlines()
    del lines[1]
    verdict = verify_chain(("\n".join(lines) + "\n").encode())
    assert not verdict.intact
    assert verdict.first_break == 1


def test_prefix_of_chain_verifies():
    # Chains authenticate everything up to the head you already hold;
    # dropping a suffix leaves a shorter but internally consistent log.
    lines = _filled_log(4).to_bytes().decode().splitlines()
    verdict = verify_chain(("\n".join(lines[:2]) + "\n").encode())
    assert verdict.intact
    assert verdict.record_count == 2


def test_single_byte_mutations_always_detected():
    data = bytearray(_filled_log(3).to_bytes())
    rng = random.Random(2024)
    for _ in range(120):
        pos = rng.randrange(len(data))
        original = data[pos]
        replacement = rng.randrange(256)
        if replacement == original:
            replacement = (replacement + 1) % 256
        mutated = bytearray(data)
        mutated[pos] = replacement
        assert not verify_chain(bytes(mutated)).intact, (
            f"mutation at byte {pos} went undetected"
        )


# -- loading and replay ----------------------------------------------------------


def test_load_records_round_trip():
    log = _filled_log(3)
    loaded = load_records(log.to_bytes())
    assert loaded == log.records


def _decision_record(log, rows, chosen, time=0):
    return log.append(
        RecordKind.DECISION,
        logical_time=time,
        intermediates={"candidates": rows},
        rulebase_version=1,
        chosen=chosen,
    )


def _row(action_id, tev, force, *, violated=None, self_damage=False):
    return {
        "id": action_id,
        "description": "",
        "self_damage_only": self_damage,
        "participants": [
            {"entity": "e", "tev_u": tev, "crash_force_n": force},
        ],
        "verdict": {"violated_priority": violated},
    }


def test_replay_reproduces_recorded_choice():
    log = AuditLog()
    _decision_record(
        log,
        [_row("a", 2.0, 500.0, violated=1), _row("b", 2.0, 100.0, violated=1)],
        chosen="b",
    )
    log.append(RecordKind.PREEMPTION, logical_time=1,
               intermediates={}, rulebase_version=1)
    _decision_record(
        log,
        [_row("x", 40.0, 10.0, violated=1), _row("y", 0.0, 900.0)],
        chosen="y",  # the only lawful candidate, despite the larger TUF
        time=2,
    )
    results = replay_decisions(log.records)
    assert len(results) == 2  # the preemption record is skipped
    assert all(r["match"] for r in results)
    assert results[0] == {"sequence": 0, "recorded": "b", "replayed": "b",
                          "match": True}
    assert results[1]["replayed"] == "y"


def test_replay_flags_doctored_choice():
    log = AuditLog()
    _decision_record(
        log,
        [_row("a", 2.0, 500.0, violated=1), _row("b", 2.0, 100.0, violated=1)],
        chosen="a",  # contradicts the recorded arithmetic
    )
    results = replay_decisions(log.records)
    assert results[0]["match"] is False
    assert results[0]["replayed"] == "b"
