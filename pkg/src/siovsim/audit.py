"""Tamper-evident audit log: an append-only SHA-256 hash chain.

Each record is serialized canonically (JSON, keys sorted, no spaces,
floats in shortest round-trip form) and hashed together with the hash
of the record before it; the first record links to an all-zero hash.
Any byte changed after the fact breaks every link from that point on,
which :func:`verify_chain` reports as the first bad sequence number.

Only logical time appears in records — never the wall clock — so two
runs over the same inputs produce byte-identical logs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterable, Optional

from .errors import IntegrityError

GENESIS_HASH = "0" * 64


class RecordKind(str, Enum):
    DECISION = "Decision"
    RULEBASE_UPDATE = "RulebaseUpdate"
    PAPA_VIOLATION = "PapaViolation"
    ATTACK_OBSERVATION = "AttackObservation"
    PREEMPTION = "Preemption"


def canonical_json(value: Any) -> str:
    """One serialized form per value: sorted keys, minimal separators."""
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=True,
        allow_nan=False,
    )


def digest(value: Any) -> str:
    return hashlib.sha256(canonical_json(value).encode("utf-8")).hexdigest()


#: Serialized field order is fixed by sorted JSON keys; the hash covers
#: every field except ``this_hash`` itself (``prev_hash`` included, which
#: is what chains the records together).
_HASHED_FIELDS = (
    "sequence",
    "logical_time",
    "record_kind",
    "inputs_digest",
    "intermediates",
    "rulebase_version",
    "chosen",
    "prev_hash",
)


@dataclass(frozen=True)
class AuditRecord:
    sequence: int
    logical_time: int
    record_kind: RecordKind
    inputs_digest: str
    intermediates: dict[str, Any]
    rulebase_version: int
    chosen: Optional[str]
    prev_hash: str
    this_hash: str = ""

    def hashed_payload(self) -> dict[str, Any]:
        return {
            "sequence": self.sequence,
            "logical_time": self.logical_time,
            "record_kind": RecordKind(self.record_kind).value,
            "inputs_digest": self.inputs_digest,
            "intermediates": self.intermediates,
            "rulebase_version": self.rulebase_version,
            "chosen": self.chosen,
            "prev_hash": self.prev_hash,
        }

    def compute_hash(self) -> str:
        return digest(self.hashed_payload())

    def to_dict(self) -> dict[str, Any]:
        payload = self.hashed_payload()
        payload["this_hash"] = self.this_hash
        return payload

    def to_line(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AuditRecord":
        return cls(
            sequence=data["sequence"],
            logical_time=data["logical_time"],
            record_kind=RecordKind(data["record_kind"]),
            inputs_digest=data["inputs_digest"],
            intermediates=data["intermediates"],
            rulebase_version=data["rulebase_version"],
            chosen=data["chosen"],
            prev_hash=data["prev_hash"],
            this_hash=data["this_hash"],
        )


class AuditLog:
    """In-memory chain builder; one per run, single writer."""

    def __init__(self) -> None:
        self.records: list[AuditRecord] = []

    @property
    def head_hash(self) -> str:
        return self.records[-1].this_hash if self.records else GENESIS_HASH

    def append(
        self,
        record_kind: RecordKind,
        *,
        logical_time: int,
        intermediates: dict[str, Any],
        rulebase_version: int,
        chosen: Optional[str] = None,
        inputs_digest: str = "",
    ) -> AuditRecord:
        record = AuditRecord(
            sequence=len(self.records),
            logical_time=logical_time,
            record_kind=record_kind,
            inputs_digest=inputs_digest or digest(intermediates),
            intermediates=intermediates,
            rulebase_version=rulebase_version,
            chosen=chosen,
            prev_hash=self.head_hash,
        )
        record = replace(record, this_hash=record.compute_hash())
        self.records.append(record)
        return record

    def append_record(self, record: AuditRecord) -> AuditRecord:
        """Append a pre-built record, refusing anything that breaks the chain."""
        if record.prev_hash != self.head_hash:
            raise IntegrityError(
                f"record {record.sequence} does not extend the chain head"
            )
        if record.sequence != len(self.records):
            raise IntegrityError(
                f"expected sequence {len(self.records)}, got {record.sequence}"
            )
        if record.this_hash != record.compute_hash():
            raise IntegrityError(f"record {record.sequence} hash mismatch")
        self.records.append(record)
        return record

    def to_bytes(self) -> bytes:
        return "".join(r.to_line() + "\n" for r in self.records).encode("utf-8")


@dataclass(frozen=True)
class ChainVerification:
    intact: bool
    first_break: Optional[int] = None
    record_count: int = 0

    def __bool__(self) -> bool:
        return self.intact


def verify_chain(data: bytes) -> ChainVerification:
    """Re-walk a serialized log; report the first record that fails.

    Failures include unparseable lines, recomputed-hash mismatches,
    broken previous-hash links, and non-contiguous sequence numbers.
    An empty log is trivially intact.
    """
    lines = [line for line in data.decode("utf-8", "replace").splitlines() if line]
    prev_hash = GENESIS_HASH
    for index, line in enumerate(lines):
        try:
            payload = json.loads(line)
            record = AuditRecord.from_dict(payload)
        except (ValueError, KeyError, TypeError):
            return ChainVerification(False, first_break=index, record_count=len(lines))
        if (
            record.sequence != index
            or record.prev_hash != prev_hash
            or record.this_hash != record.compute_hash()
        ):
            return ChainVerification(
                False, first_break=index, record_count=len(lines)
            )
        prev_hash = record.this_hash
    return ChainVerification(True, record_count=len(lines))


def load_records(data: bytes) -> list[AuditRecord]:
    """Parse a log that has already been verified."""
    records = []
    for line in data.decode("utf-8").splitlines():
        if line:
            records.append(AuditRecord.from_dict(json.loads(line)))
    return records


def replay_decisions(records: Iterable[AuditRecord]) -> list[dict[str, Any]]:
    """Re-run every recorded decision from its own recorded inputs.

    Each Decision record carries the complete per-candidate table
    (participants, forces, verdicts), which is enough to rebuild the
    candidate set, re-apply the rule filter and the least-total-harm
    selection, and compare the outcome with what was recorded.
    """
    from .ethics import CandidateAction, Participant, select_min_tuf

    results = []
    for record in records:
        if record.record_kind is not RecordKind.DECISION:
            continue
        rebuilt = []
        priorities: dict[str, Optional[int]] = {}
        for row in record.intermediates["candidates"]:
            rebuilt.append(
                CandidateAction(
                    action_id=row["id"],
                    description=row.get("description", ""),
                    self_damage_only=row["self_damage_only"],
                    participants=tuple(
                        Participant(p["entity"], p["tev_u"], p["crash_force_n"])
                        for p in row["participants"]
                    ),
                )
            )
            priorities[row["id"]] = row["verdict"]["violated_priority"]

        violated = [p for p in priorities.values() if p is not None]
        if len(violated) < len(rebuilt):
            admissible = [c for c in rebuilt if priorities[c.action_id] is None]
        else:
            least_severe = max(violated)
            admissible = [
                c for c in rebuilt if priorities[c.action_id] == least_severe
            ]
        chosen, _ = select_min_tuf(admissible)
        results.append({
            "sequence": record.sequence,
            "recorded": record.chosen,
            "replayed": chosen.action_id,
            "match": chosen.action_id == record.chosen,
        })
    return results
