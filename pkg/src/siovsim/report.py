"""Report artifacts: delimited tables, force diagrams, trace exports.

Everything here is a pure function of already-computed results, and
every byte written is deterministic: stable column order, stable number
formatting (integer-valued floats print without a trailing ``.0``,
everything else prints its shortest round-trip form), no timestamps,
and a fixed hash salt for SVG element ids.  Two runs of the same
scenario with the same seed must produce identical files.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence

from .audit import AuditRecord, RecordKind
from .ethics import CandidateAction
from .node import Decision

UF_TABLE_HEADER = (
    "action_id", "participant_id", "tev_u", "crash_force_n",
    "uf_un", "tuf_un", "chosen",
)

TRACE_HEADER = ("tick", "seq", "event", "node", "origin", "msg_id", "kind", "detail")

#: Fixed salt so matplotlib generates the same SVG element ids each run.
_SVG_HASH_SALT = "siovsim"


def fmt_number(value: Any) -> str:
    """Format a number for delimited output, bit-stable across runs."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if value.is_integer() and abs(value) < 1e16:
            return str(int(value))
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ParticipantRow:
    entity_id: str
    tev_u: float
    crash_force_n: float
    uf_un: float


@dataclass(frozen=True)
class CandidateRow:
    action_id: str
    description: str
    self_damage_only: bool
    verdict_status: str
    violated_law: Optional[str]
    violated_priority: Optional[int]
    tuf_un: float
    chosen: bool
    participants: tuple[ParticipantRow, ...]


@dataclass(frozen=True)
class DecisionReport:
    """Everything the report writers need, detached from live objects."""

    scenario_digest: str
    seed: int
    rulebase_version: int
    chosen_id: str
    chosen_tuf_un: float
    fallback_engaged: bool
    tie_break: Optional[str]
    admissible_ids: tuple[str, ...]
    candidates: tuple[CandidateRow, ...]


def build_decision_report(
    decision: Decision,
    actions: Sequence[CandidateAction],
    *,
    scenario_digest: str = "",
    seed: int = 0,
) -> DecisionReport:
    verdicts = dict(decision.verdicts)
    tufs = dict(decision.tuf_table)
    rows = []
    for action in actions:
        verdict = verdicts[action.action_id]
        rows.append(CandidateRow(
            action_id=action.action_id,
            description=action.description,
            self_damage_only=action.self_damage_only,
            verdict_status=verdict.status.value,
            violated_law=verdict.violated_law,
            violated_priority=verdict.violated_priority,
            tuf_un=tufs[action.action_id],
            chosen=action.action_id == decision.chosen.action_id,
            participants=tuple(
                ParticipantRow(p.entity_id, p.tev_u, p.crash_force_n, p.uf_un)
                for p in action.participants
            ),
        ))
    return DecisionReport(
        scenario_digest=scenario_digest,
        seed=seed,
        rulebase_version=decision.rulebase_version,
        chosen_id=decision.chosen.action_id,
        chosen_tuf_un=tufs[decision.chosen.action_id],
        fallback_engaged=decision.fallback_engaged,
        tie_break=decision.tie_break,
        admissible_ids=decision.admissible_ids,
        candidates=tuple(rows),
    )


def report_from_decision_record(record: AuditRecord) -> DecisionReport:
    """Rebuild a report from an audit record's recorded intermediates."""
    if record.record_kind is not RecordKind.DECISION:
        raise ValueError(f"record {record.sequence} is not a decision")
    inter = record.intermediates
    rows = []
    for cand in inter["candidates"]:
        rows.append(CandidateRow(
            action_id=cand["id"],
            description=cand.get("description", ""),
            self_damage_only=bool(cand.get("self_damage_only", False)),
            verdict_status=cand["verdict"]["status"],
            violated_law=cand["verdict"]["violated_law"],
            violated_priority=cand["verdict"]["violated_priority"],
            tuf_un=cand["tuf_un"],
            chosen=bool(cand["chosen"]),
            participants=tuple(
                ParticipantRow(
                    p["entity"], p["tev_u"], p["crash_force_n"], p["uf_un"]
                )
                for p in cand["participants"]
            ),
        ))
    chosen_rows = [r for r in rows if r.chosen]
    chosen_id = chosen_rows[0].action_id if chosen_rows else record.chosen or ""
    return DecisionReport(
        scenario_digest=record.inputs_digest,
        seed=int(inter.get("seed", 0)),
        rulebase_version=record.rulebase_version,
        chosen_id=chosen_id,
        chosen_tuf_un=chosen_rows[0].tuf_un if chosen_rows else 0.0,
        fallback_engaged=bool(inter.get("fallback_engaged", False)),
        tie_break=inter.get("tie_break"),
        admissible_ids=tuple(inter.get("admissible", ())),
        candidates=tuple(rows),
    )


def uf_table_csv(report: DecisionReport) -> str:
    """The per-participant utilitarian-force table, one row per exposure."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(UF_TABLE_HEADER)
    for row in report.candidates:
        for part in row.participants:
            writer.writerow([
                row.action_id,
                part.entity_id,
                fmt_number(part.tev_u),
                fmt_number(part.crash_force_n),
                fmt_number(part.uf_un),
                fmt_number(row.tuf_un),
                "true" if row.chosen else "false",
            ])
    return buffer.getvalue()


def write_uf_table(report: DecisionReport, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(uf_table_csv(report))


def render_force_diagram(report: DecisionReport, path: str) -> None:
    """Draw the candidate force comparison as an SVG file.

    One row per candidate: an arrow per participant, laid end to end,
    each arrow's length proportional to that participant's share of the
    candidate's total utilitarian force.  The chosen candidate is the
    green row.  Output is deterministic (fixed hash salt, no date
    metadata).
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with plt.rc_context({"svg.hashsalt": _SVG_HASH_SALT}):
        n = max(len(report.candidates), 1)
        fig, ax = plt.subplots(figsize=(9, 1.2 + 0.9 * n))
        max_tuf = max((row.tuf_un for row in report.candidates), default=1.0) or 1.0
        for i, row in enumerate(report.candidates):
            y = n - 1 - i
            color = "#2e7d32" if row.chosen else "#9e9e9e"
            cursor = 0.0
            for part in row.participants:
                share = abs(part.uf_un)
                ax.annotate(
                    "",
                    xy=(cursor + share, y),
                    xytext=(cursor, y),
                    arrowprops={"arrowstyle": "-|>", "color": color, "lw": 2},
                )
                if share > 0:
                    ax.text(
                        cursor + share / 2, y + 0.18, part.entity_id,
                        ha="center", va="bottom", fontsize=7, color="#424242",
                    )
                cursor += share
            marker = " ← chosen" if row.chosen else ""
            label = f"{row.action_id}: {fmt_number(row.tuf_un)} uN{marker}"
            if row.verdict_status != "Permitted":
                label += f" [{row.violated_law}]"
            ax.text(max_tuf * 1.02, y, label, va="center", fontsize=9)
        ax.set_xlim(0, max_tuf * 1.45)
        ax.set_ylim(-0.6, n - 0.4)
        ax.set_yticks([])
        ax.set_xlabel("utilitarian force (uN)")
        ax.set_title("candidate total utilitarian force")
        ax.spines["top"].set_visible(False)
        ax.spines["right"].set_visible(False)
        ax.spines["left"].set_visible(False)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def trace_csv(trace: Sequence[Mapping[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for row in trace:
        writer.writerow([fmt_number(row[column]) for column in TRACE_HEADER])
    return buffer.getvalue()


def write_trace_csv(trace: Sequence[Mapping[str, Any]], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(trace_csv(trace))


def summary_json(summary: Mapping[str, Any]) -> str:
    return json.dumps(summary, indent=2, sort_keys=True) + "\n"


def write_summary_json(summary: Mapping[str, Any], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(summary_json(summary))


def format_decision_text(records: Sequence[AuditRecord]) -> str:
    """Human-readable account of what the log says happened and why."""
    lines: list[str] = []
    for record in records:
        if record.record_kind is RecordKind.DECISION:
            lines.extend(_decision_block(record))
        elif record.record_kind is RecordKind.PAPA_VIOLATION:
            inter = record.intermediates
            lines.append(
                f"[{record.sequence}] t={record.logical_time} information-norm "
                f"quarantine at {inter['receiver']}: message {inter['msg_id']} "
                f"from {inter['origin']} violates "
                + ", ".join(inter["violations"])
            )
        elif record.record_kind is RecordKind.PREEMPTION:
            inter = record.intermediates
            if inter.get("granted"):
                lines.append(
                    f"[{record.sequence}] t={record.logical_time} right-of-way "
                    f"granted to {inter['vehicle']} over "
                    + ", ".join(inter["path"])
                )
            else:
                lines.append(
                    f"[{record.sequence}] t={record.logical_time} right-of-way "
                    f"denied to {inter['vehicle']}: {inter.get('reason', '')}"
                )
        elif record.record_kind is RecordKind.ATTACK_OBSERVATION:
            inter = record.intermediates
            lines.append(
                f"[{record.sequence}] t={record.logical_time} adversary active: "
                f"{inter.get('attack', '?')}"
            )
        else:
            lines.append(
                f"[{record.sequence}] t={record.logical_time} "
                f"{record.record_kind.value}"
            )
    return "\n".join(lines) + ("\n" if lines else "")


def _decision_block(record: AuditRecord) -> list[str]:
    report = report_from_decision_record(record)
    lines = [
        f"[{record.sequence}] t={record.logical_time} decision under rule base "
        f"v{report.rulebase_version} (seed {report.seed})"
    ]
    for row in report.candidates:
        mark = "*" if row.chosen else " "
        verdict = (
            "permitted"
            if row.verdict_status == "Permitted"
            else f"forbidden by {row.violated_law} (priority {row.violated_priority})"
        )
        desc = f"  {row.description}" if row.description else ""
        lines.append(
            f"  {mark} {row.action_id}: TUF {fmt_number(row.tuf_un)} uN, "
            f"{verdict}{desc}"
        )
    if report.fallback_engaged:
        lines.append(
            "    every option violates a law; the least severe violators "
            f"({', '.join(report.admissible_ids)}) stayed eligible"
        )
    reason = "least total utilitarian force among eligible options"
    if report.tie_break == "self_damage_only":
        reason += "; tie broken toward the self-sacrificing option"
    elif report.tie_break == "action_id":
        reason += "; tie broken by lowest action id"
    lines.append(f"    chose {report.chosen_id} "
                 f"({fmt_number(report.chosen_tuf_un)} uN): {reason}")
    return lines
