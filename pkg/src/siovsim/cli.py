"""Command-line front end.

Subcommands:

``validate``
    Parse and check a scenario file, reporting every problem found.
``run``
    Execute the scenario — the avoidance decision if candidates are
    present, the network simulation if a network section is present —
    and write the force table (CSV), the force diagram (SVG), and the
    hash-chained audit log next to each other in the output directory.
``netsim``
    Run only the network section of a scenario.
``report``
    Verify an audit log's hash chain, replay every recorded decision
    from its recorded inputs, print a human-readable account, and
    optionally re-emit the table and diagram from the log alone.

Exit codes: 0 success, 1 unexpected runtime failure, 2 invalid input,
3 file I/O failure, 4 audit-log integrity failure (the first broken
record is reported as ``break_at=<sequence>``).

The effective seed is resolved as: ``--seed`` if given, else the
scenario's ``seed`` field, else the ``SIOV_SEED`` environment variable,
else 0.  Every artifact is staged to a temporary file and renamed into
place, so a failed run never leaves a partial file behind.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
import tempfile
from typing import Iterator, Optional

from .audit import load_records, replay_decisions, verify_chain
from .errors import (
    IntegrityError,
    ScenarioSyntaxError,
    ScenarioValidationError,
    SiovError,
)
from .netsim import NetworkSim
from .report import (
    fmt_number,
    format_decision_text,
    render_force_diagram,
    report_from_decision_record,
    summary_json,
    trace_csv,
    uf_table_csv,
)
from .scenario import parse_rulebase_document, parse_scenario, run_scenario

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_INTEGRITY = 4

SEED_ENV_VAR = "SIOV_SEED"

log = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="siovsim",
        description="Ethical decision engine and network simulator "
                    "for smart-vehicle scenarios.",
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0,
        help="increase log verbosity (-v info, -vv debug)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a scenario file")
    p_validate.add_argument("scenario", help="path to the scenario JSON file")
    p_validate.add_argument(
        "--lenient", action="store_true",
        help="tolerate unknown fields instead of rejecting them",
    )

    p_run = sub.add_parser("run", help="execute a scenario end to end")
    p_run.add_argument("scenario", help="path to the scenario JSON file")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--format", choices=("csv", "svg", "both"),
                       default="both", help="which decision artifacts to write")
    p_run.add_argument("--rulebase", default=None,
                       help="path to a rule-base JSON file overriding the default")
    p_run.add_argument("--lenient", action="store_true",
                       help="tolerate unknown scenario fields")

    p_net = sub.add_parser("netsim", help="run only the network section")
    p_net.add_argument("scenario", help="path to the scenario JSON file")
    p_net.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    p_net.add_argument("--out", default=".", help="output directory")
    p_net.add_argument("--lenient", action="store_true",
                       help="tolerate unknown scenario fields")

    p_report = sub.add_parser(
        "report", help="verify, replay, and explain an audit log"
    )
    p_report.add_argument("audit_log", help="path to an audit log (JSON lines)")
    p_report.add_argument(
        "--out", default=None,
        help="directory to re-emit per-decision tables and diagrams into",
    )
    return parser


def _read_bytes(path: str) -> bytes:
    with open(path, "rb") as handle:
        return handle.read()


@contextlib.contextmanager
def _staged(path: str) -> Iterator[str]:
    """Yield a temporary path that replaces ``path`` only on success."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".stage-")
    os.close(fd)
    try:
        yield tmp
        # mkstemp creates 0600; give the artifact normal umask permissions
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _write_staged(path: str, data: str | bytes) -> None:
    with _staged(path) as tmp:
        mode = "wb" if isinstance(data, bytes) else "w"
        kwargs = {} if isinstance(data, bytes) else {"encoding": "utf-8",
                                                     "newline": ""}
        with open(tmp, mode, **kwargs) as handle:
            handle.write(data)


def _resolve_seed(cli_seed: Optional[int], scenario_seed: Optional[int]) -> int:
    if cli_seed is not None:
        if cli_seed < 0:
            raise ScenarioValidationError("--seed must be >= 0")
        return cli_seed
    if scenario_seed is not None:
        return scenario_seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise ScenarioValidationError(
                f"{SEED_ENV_VAR} must be an integer, got {env!r}"
            ) from None
        if value < 0:
            raise ScenarioValidationError(f"{SEED_ENV_VAR} must be >= 0")
        return value
    return 0


def _load_scenario(path: str, lenient: bool):
    return parse_scenario(_read_bytes(path), strict=not lenient)


def _cmd_validate(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args.scenario, args.lenient)
    parts = [
        f"{len(scenario.entities)} entities",
        f"{len(scenario.candidates)} candidates",
    ]
    if scenario.rulebase is not None:
        parts.append(f"rulebase v{scenario.rulebase.version}")
    if scenario.network is not None:
        parts.append("network")
    print("ok: " + ", ".join(parts))
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args.scenario, args.lenient)
    rulebase = None
    if args.rulebase is not None:
        rulebase = parse_rulebase_document(_read_bytes(args.rulebase))
    seed = _resolve_seed(args.seed, scenario.seed)
    result = run_scenario(scenario, seed=seed, rulebase=rulebase)

    os.makedirs(args.out, exist_ok=True)
    written = []
    if result.report is not None:
        if args.format in ("csv", "both"):
            path = os.path.join(args.out, "uf_table.csv")
            _write_staged(path, uf_table_csv(result.report))
            written.append(path)
        if args.format in ("svg", "both"):
            path = os.path.join(args.out, "uf_diagram.svg")
            with _staged(path) as tmp:
                render_force_diagram(result.report, tmp)
            written.append(path)
    if result.net_summary is not None:
        path = os.path.join(args.out, "trace.csv")
        _write_staged(path, trace_csv(result.trace))
        written.append(path)
        path = os.path.join(args.out, "summary.json")
        _write_staged(path, summary_json(result.net_summary))
        written.append(path)
    audit_path = os.path.join(args.out, "audit.jsonl")
    _write_staged(audit_path, result.audit.to_bytes())
    written.append(audit_path)

    for path in written:
        print(f"wrote {path}")
    print(f"seed={result.seed}")
    if result.net_summary is not None:
        print(f"final_tick={result.net_summary['final_tick']}")
    if result.report is not None:
        print(
            f"chosen={result.report.chosen_id} "
            f"tuf_un={fmt_number(result.report.chosen_tuf_un)}"
        )
    return EXIT_OK


def _cmd_netsim(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args.scenario, args.lenient)
    if scenario.network is None:
        raise ScenarioValidationError(
            "scenario has no network section; nothing to simulate"
        )
    seed = _resolve_seed(args.seed, scenario.seed)
    sim = NetworkSim(scenario.entities, scenario.network, seed)
    summary = sim.run()

    os.makedirs(args.out, exist_ok=True)
    for name, data in (
        ("trace.csv", trace_csv(sim.trace)),
        ("summary.json", summary_json(summary)),
        ("audit.jsonl", sim.audit_log.to_bytes()),
    ):
        path = os.path.join(args.out, name)
        _write_staged(path, data)
        print(f"wrote {path}")
    print(f"seed={seed}")
    print(f"final_tick={summary['final_tick']} processed={summary['processed']}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    data = _read_bytes(args.audit_log)
    verification = verify_chain(data)
    if not verification.intact:
        print(f"break_at={verification.first_break}")
        print("audit log FAILED verification", file=sys.stderr)
        return EXIT_INTEGRITY
    records = load_records(data)
    print(f"chain ok: {verification.record_count} records")
    text = format_decision_text(records)
    if text:
        print(text, end="")

    replays = replay_decisions(records)
    tampered = False
    for entry in replays:
        match = "true" if entry["match"] else "false"
        print(
            f"replay seq={entry['sequence']} recorded={entry['recorded']} "
            f"replayed={entry['replayed']} match={match}"
        )
        if not entry["match"]:
            tampered = True

    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        decisions = [
            r for r in records if r.record_kind.value == "Decision"
        ]
        for index, record in enumerate(decisions):
            suffix = "" if len(decisions) == 1 else f"-{record.sequence}"
            report = report_from_decision_record(record)
            csv_path = os.path.join(args.out, f"uf_table{suffix}.csv")
            _write_staged(csv_path, uf_table_csv(report))
            print(f"wrote {csv_path}")
            svg_path = os.path.join(args.out, f"uf_diagram{suffix}.svg")
            with _staged(svg_path) as tmp:
                render_force_diagram(report, tmp)
            print(f"wrote {svg_path}")

    if tampered:
        print("recorded choices do not survive replay", file=sys.stderr)
        return EXIT_INTEGRITY
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "run": _cmd_run,
    "netsim": _cmd_netsim,
    "report": _cmd_report,
}


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(
            level=logging.DEBUG if args.verbose > 1 else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s",
        )
    try:
        return _COMMANDS[args.command](args)
    except ScenarioSyntaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ScenarioValidationError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_VALIDATION
    except IntegrityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SiovError as exc:
        # Anything structurally wrong with the inputs that slipped past
        # document validation (bad config values, unknown references).
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        log.exception("unexpected failure")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
