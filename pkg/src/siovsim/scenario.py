"""Scenario documents: strict parsing, validation, and execution.

A scenario is one JSON document carrying the road world (entities),
the avoidance options under consideration (candidates), and optionally
a rule-base revision and a network-simulation section.  Parsing is
strict by default — unknown fields and dangling references are
rejected with one diagnostic per problem — because a file that drives
an ethical decision should never be half-understood.  ``strict=False``
tolerates unknown fields for forward compatibility.

:func:`run_scenario` executes a parsed scenario: the decision pipeline
if candidates are present, the network simulation if a network section
is present, both feeding one hash-chained audit log.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

from .audit import AuditLog, RecordKind, digest
from .entities import EntityKind, EntityState, NodeRole
from .errors import (
    DomainError,
    RuleValidationError,
    ScenarioSyntaxError,
    ScenarioValidationError,
    SiovError,
)
from .ethics import CandidateAction, Occupant, Participant, crash_force
from .netsim import Channel, NetworkConfig, NetworkSim, Route, Signal
from .node import Decision, WorldModel, judge
from .report import DecisionReport, build_decision_report
from .rules import Law, PredicateKind, RuleBase, default_rulebase

SCHEMA_VERSION = 1

_FLAG_KEYS = {
    "injures_human", "injures_animal", "contradicts_driver_order",
    "destroys_self", "violates_traffic_or_papa",
    "order_obedience_violates", "self_protection_violates",
}

_BOOL_FLAGS = {
    "injures_human", "injures_animal", "contradicts_driver_order",
    "destroys_self", "violates_traffic_or_papa",
}


@dataclass(frozen=True)
class ScenarioCandidate:
    action: CandidateAction
    flag_overrides: Optional[tuple[tuple[str, Any], ...]] = None

    def overrides_dict(self) -> Optional[dict[str, Any]]:
        return dict(self.flag_overrides) if self.flag_overrides is not None else None


@dataclass
class Scenario:
    schema_version: int
    seed: Optional[int]  # None when the document does not pin one
    entities: dict[str, EntityState]
    candidates: tuple[ScenarioCandidate, ...]
    description: str = ""
    rulebase: Optional[RuleBase] = None
    network: Optional[NetworkConfig] = None

    @property
    def deciding_vehicle(self) -> Optional[EntityState]:
        for entity in self.entities.values():
            if entity.kind is EntityKind.SMART_VEHICLE:
                return entity
        return None


class _Problems:
    """Collects every diagnostic before failing, so one validation run
    reports one complete list instead of the first issue only."""

    def __init__(self) -> None:
        self.items: list[str] = []

    def add(self, path: str, message: str) -> None:
        self.items.append(f"{path}: {message}")

    def raise_if_any(self) -> None:
        if self.items:
            raise ScenarioValidationError(self.items)


def _check_keys(
    raw: Mapping[str, Any], allowed: set[str], required: set[str],
    path: str, problems: _Problems, strict: bool,
) -> bool:
    ok = True
    if not isinstance(raw, Mapping):
        problems.add(path, f"expected an object, got {type(raw).__name__}")
        return False
    for key in required:
        if key not in raw:
            problems.add(path, f"missing required field {key!r}")
            ok = False
    if strict:
        for key in raw:
            if key not in allowed:
                problems.add(path, f"unknown field {key!r}")
                ok = False
    return ok


def _get(raw: Mapping[str, Any], key: str, default: Any = None) -> Any:
    value = raw.get(key, default)
    return default if value is None else value


def parse_scenario(source: str | bytes | Mapping[str, Any], *, strict: bool = True) -> Scenario:
    """Parse and validate one scenario document.

    Raises :class:`ScenarioSyntaxError` for malformed JSON (with line
    and column) and :class:`ScenarioValidationError` carrying every
    schema, domain, and referential problem found.
    """
    if isinstance(source, (str, bytes)):
        try:
            raw = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ScenarioSyntaxError(exc.msg, line=exc.lineno, column=exc.colno) from None
    else:
        raw = source
    if not isinstance(raw, Mapping):
        raise ScenarioValidationError("document root must be an object")

    problems = _Problems()
    _check_keys(
        raw,
        {"schema_version", "description", "seed", "entities", "candidates",
         "rulebase", "network"},
        {"schema_version", "entities"},
        "$", problems, strict,
    )

    version = raw.get("schema_version")
    if version is not None and version != SCHEMA_VERSION:
        problems.add("$.schema_version",
                     f"unsupported version {version!r}; this build reads {SCHEMA_VERSION}")

    seed = raw.get("seed")
    if seed is not None and (
        not isinstance(seed, int) or isinstance(seed, bool) or not (0 <= seed < 2**64)
    ):
        problems.add("$.seed", f"seed must be an integer in [0, 2^64), got {seed!r}")
        seed = None

    description = str(raw.get("description", ""))

    entities = _parse_entities(raw.get("entities", []), problems, strict)
    candidates = _parse_candidates(
        raw.get("candidates", []), entities, problems, strict
    )
    rulebase = None
    if raw.get("rulebase") is not None:
        rulebase = _parse_rulebase(raw["rulebase"], "$.rulebase", problems, strict)
    network = None
    if raw.get("network") is not None:
        network = _parse_network(raw["network"], entities, problems, strict)

    problems.raise_if_any()
    return Scenario(
        schema_version=SCHEMA_VERSION,
        seed=seed,
        entities=entities,
        candidates=candidates,
        description=description,
        rulebase=rulebase,
        network=network,
    )


def _parse_entities(raw: Any, problems: _Problems, strict: bool) -> dict[str, EntityState]:
    entities: dict[str, EntityState] = {}
    if not isinstance(raw, list):
        problems.add("$.entities", "must be an array")
        return entities
    for i, item in enumerate(raw):
        path = f"$.entities[{i}]"
        if not _check_keys(
            item,
            {"id", "kind", "position", "speed_mps", "heading_deg", "mass_kg",
             "braking_distance_m", "safety_rating", "occupants", "role",
             "access_role"},
            {"id", "kind"},
            path, problems, strict,
        ):
            continue
        entity_id = str(item["id"])
        if entity_id in entities:
            problems.add(path, f"duplicate entity id {entity_id!r}")
            continue
        occupants = []
        raw_occupants = _get(item, "occupants", [])
        if not isinstance(raw_occupants, list):
            problems.add(f"{path}.occupants", "must be an array")
            raw_occupants = []
        occupants_ok = True
        for j, occ in enumerate(raw_occupants):
            if not _check_keys(occ, {"age_years"}, {"age_years"},
                               f"{path}.occupants[{j}]", problems, strict):
                occupants_ok = False
                continue
            try:
                occupants.append(Occupant(float(occ["age_years"])))
            except (DomainError, TypeError, ValueError) as exc:
                problems.add(f"{path}.occupants[{j}]", str(exc))
                occupants_ok = False
        if not occupants_ok:
            continue
        try:
            kind = EntityKind(item["kind"])
        except ValueError:
            problems.add(f"{path}.kind", f"unknown entity kind {item['kind']!r}")
            continue
        try:
            position = _get(item, "position", [0.0, 0.0])
            entities[entity_id] = EntityState(
                entity_id=entity_id,
                kind=kind,
                position=(float(position[0]), float(position[1])),
                speed_mps=float(_get(item, "speed_mps", 0.0)),
                heading_deg=float(_get(item, "heading_deg", 0.0)),
                mass_kg=float(_get(item, "mass_kg", 0.0)),
                braking_distance_m=float(_get(item, "braking_distance_m", 1.0)),
                safety_rating=float(_get(item, "safety_rating", 0.0)),
                occupants=tuple(occupants),
                role=NodeRole(item["role"]) if item.get("role") else None,
                access_role=str(_get(item, "access_role", "")),
            )
        except (DomainError, ValueError, TypeError, IndexError) as exc:
            problems.add(path, str(exc))
    return entities


def _parse_candidates(
    raw: Any,
    entities: dict[str, EntityState],
    problems: _Problems,
    strict: bool,
) -> tuple[ScenarioCandidate, ...]:
    if not isinstance(raw, list):
        problems.add("$.candidates", "must be an array")
        return ()
    deciding = next(
        (e for e in entities.values() if e.kind is EntityKind.SMART_VEHICLE), None
    )
    if raw and deciding is None:
        problems.add("$.candidates",
                     "candidates need a SmartVehicle entity to decide for")
    default_force = None
    if deciding is not None:
        try:
            default_force = crash_force(
                deciding.mass_kg, deciding.speed_mps, deciding.braking_distance_m
            )
        except DomainError as exc:
            problems.add("$.candidates", f"cannot derive default crash force: {exc}")

    candidates: list[ScenarioCandidate] = []
    seen_ids: set[str] = set()
    for i, item in enumerate(raw):
        path = f"$.candidates[{i}]"
        if not _check_keys(
            item,
            {"id", "description", "self_damage_only", "participants", "flags"},
            {"id", "participants"},
            path, problems, strict,
        ):
            continue
        action_id = str(item["id"])
        if action_id in seen_ids:
            problems.add(path, f"duplicate candidate id {action_id!r}")
            continue
        seen_ids.add(action_id)

        participants: list[Participant] = []
        raw_parts = item["participants"]
        if not isinstance(raw_parts, list) or not raw_parts:
            problems.add(f"{path}.participants", "must be a non-empty array")
            continue
        parts_ok = True
        for j, part in enumerate(raw_parts):
            part_path = f"{path}.participants[{j}]"
            if not _check_keys(part, {"entity", "force_n"}, {"entity"},
                               part_path, problems, strict):
                parts_ok = False
                continue
            ref = str(part["entity"])
            entity = entities.get(ref)
            if entity is None:
                problems.add(part_path, f"references unknown entity {ref!r}")
                parts_ok = False
                continue
            force = part.get("force_n")
            if force is None:
                if default_force is None:
                    problems.add(part_path,
                                 "no force_n given and no deciding vehicle to derive it from")
                    parts_ok = False
                    continue
                force = default_force
            try:
                participants.append(
                    Participant(ref, tev_u=entity.tev_u, crash_force_n=float(force))
                )
            except (DomainError, ValueError, TypeError) as exc:
                problems.add(part_path, str(exc))
                parts_ok = False
        if not parts_ok:
            continue

        overrides = None
        if item.get("flags") is not None:
            flags = item["flags"]
            if not _check_keys(flags, _FLAG_KEYS, set(), f"{path}.flags",
                               problems, strict):
                continue
            cleaned = {}
            flag_ok = True
            for key, value in flags.items():
                if key not in _FLAG_KEYS:
                    continue  # lenient mode: skip unknown
                if key in _BOOL_FLAGS and not isinstance(value, bool):
                    problems.add(f"{path}.flags.{key}", "must be a boolean")
                    flag_ok = False
                elif key not in _BOOL_FLAGS and value is not None and (
                    not isinstance(value, int) or isinstance(value, bool) or value < 1
                ):
                    problems.add(f"{path}.flags.{key}",
                                 "must be a law priority (integer >= 1) or null")
                    flag_ok = False
                else:
                    cleaned[key] = value
            if not flag_ok:
                continue
            overrides = tuple(sorted(cleaned.items()))

        candidates.append(
            ScenarioCandidate(
                action=CandidateAction(
                    action_id=action_id,
                    participants=tuple(participants),
                    description=str(_get(item, "description", "")),
                    self_damage_only=bool(_get(item, "self_damage_only", False)),
                ),
                flag_overrides=overrides,
            )
        )
    return tuple(candidates)


def _parse_rulebase(raw: Any, path: str, problems: _Problems, strict: bool) -> Optional[RuleBase]:
    if not _check_keys(raw, {"version", "community_id", "laws"},
                       {"version", "laws"}, path, problems, strict):
        return None
    laws = []
    raw_laws = raw["laws"]
    if not isinstance(raw_laws, list):
        problems.add(f"{path}.laws", "must be an array")
        return None
    ok = True
    for i, item in enumerate(raw_laws):
        law_path = f"{path}.laws[{i}]"
        if not _check_keys(item, {"priority", "id", "predicate", "description"},
                           {"priority", "id", "predicate"}, law_path, problems, strict):
            ok = False
            continue
        try:
            laws.append(Law(
                priority=int(item["priority"]),
                law_id=str(item["id"]),
                predicate_kind=PredicateKind(item["predicate"]),
                description=str(_get(item, "description", "")),
            ))
        except (ValueError, RuleValidationError) as exc:
            problems.add(law_path, str(exc))
            ok = False
    if not ok:
        return None
    try:
        return RuleBase(
            version=int(raw["version"]),
            laws=tuple(laws),
            community_id=str(_get(raw, "community_id", "default")),
        )
    except (RuleValidationError, ValueError, TypeError) as exc:
        problems.add(path, str(exc))
        return None


def parse_rulebase_document(source: str | bytes, *, strict: bool = True) -> RuleBase:
    """Parse a standalone rule-base file (the CLI ``--rulebase`` input)."""
    try:
        raw = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ScenarioSyntaxError(exc.msg, line=exc.lineno, column=exc.colno) from None
    problems = _Problems()
    if not isinstance(raw, Mapping):
        raise ScenarioValidationError("rule-base document root must be an object")
    _check_keys(raw, {"schema_version", "version", "community_id", "laws"},
                {"schema_version"}, "$", problems, strict)
    if raw.get("schema_version") != SCHEMA_VERSION:
        problems.add("$.schema_version",
                     f"unsupported version {raw.get('schema_version')!r}; "
                     f"this build reads {SCHEMA_VERSION}")
    rulebase = _parse_rulebase(
        {k: v for k, v in raw.items() if k != "schema_version"},
        "$", problems, strict,
    )
    problems.raise_if_any()
    assert rulebase is not None
    return rulebase


_SCHEDULE_KEYS = {
    "broadcast": ({"tick", "op", "node", "kind", "event_id", "ttl_hops",
                   "context_region", "payload", "papa"}, {"tick", "op", "node"}),
    "send": ({"tick", "op", "from", "to", "kind", "payload", "papa"},
             {"tick", "op", "from", "to"}),
    "report_accident": ({"tick", "op", "node", "event_id", "position"},
                        {"tick", "op", "node", "event_id"}),
    "request_right_of_way": ({"tick", "op", "vehicle", "path"},
                             {"tick", "op", "vehicle", "path"}),
    "form_platoon": ({"tick", "op", "leader", "members"},
                     {"tick", "op", "leader", "members"}),
    "join_platoon": ({"tick", "op", "node", "platoon"},
                     {"tick", "op", "node", "platoon"}),
    "leave_platoon": ({"tick", "op", "node"}, {"tick", "op", "node"}),
    "platoon_speed": ({"tick", "op", "platoon", "speed_mps"},
                      {"tick", "op", "platoon", "speed_mps"}),
}

_ATTACK_KEYS = {
    "DosFlood": ({"kind", "origin", "target", "rate_per_tick", "start_tick",
                  "duration_ticks"}, {"kind", "origin", "target"}),
    "FalseMessage": ({"kind", "origin", "event_id", "start_tick", "repeats",
                      "position"}, {"kind", "origin"}),
    "Eavesdrop": ({"kind", "observer"}, {"kind", "observer"}),
}


def _parse_network(
    raw: Any,
    entities: dict[str, EntityState],
    problems: _Problems,
    strict: bool,
) -> Optional[NetworkConfig]:
    path = "$.network"
    if not _check_keys(
        raw,
        {"channel", "max_ticks", "corroboration_k", "hold_window_ticks",
         "rate_limit_per_tick", "default_ttl_hops", "preemption_enabled",
         "slow_speed_mps", "trust", "signals", "routes", "platoons",
         "schedule", "attacks"},
        set(), path, problems, strict,
    ):
        return None

    networked = {e.entity_id for e in entities.values() if e.is_networked}

    def check_node(ref: Any, where: str) -> str:
        ref = str(ref)
        if ref not in networked:
            problems.add(where, f"references unknown or non-networked node {ref!r}")
        return ref

    channel = Channel()
    if raw.get("channel") is not None:
        ch = raw["channel"]
        if _check_keys(ch, {"latency_s", "range_m", "data_rate_mbps",
                            "loss_probability", "interference_windows"},
                       set(), f"{path}.channel", problems, strict):
            try:
                channel = Channel(
                    latency_s=float(_get(ch, "latency_s", 0.02)),
                    range_m=float(_get(ch, "range_m", 1000.0)),
                    data_rate_mbps=float(_get(ch, "data_rate_mbps", 27.0)),
                    loss_probability=float(_get(ch, "loss_probability", 0.0)),
                    interference_windows=tuple(
                        (int(a), int(b))
                        for a, b in _get(ch, "interference_windows", [])
                    ),
                )
            except (SiovError, ValueError, TypeError) as exc:
                problems.add(f"{path}.channel", str(exc))

    signals = []
    signal_ids = set()
    for i, item in enumerate(_get(raw, "signals", [])):
        sig_path = f"{path}.signals[{i}]"
        if not _check_keys(item, {"id", "rsu", "position", "green_ticks",
                                  "red_ticks", "phase_offset"},
                           {"id", "rsu", "position", "green_ticks", "red_ticks"},
                           sig_path, problems, strict):
            continue
        signal_id = str(item["id"])
        if signal_id in signal_ids:
            problems.add(sig_path, f"duplicate signal id {signal_id!r}")
            continue
        signal_ids.add(signal_id)
        rsu = str(item["rsu"])
        entity = entities.get(rsu)
        if entity is None or entity.kind is not EntityKind.RSU:
            problems.add(f"{sig_path}.rsu",
                         f"must reference a roadside unit, got {rsu!r}")
            continue
        try:
            green = int(item["green_ticks"])
            red = int(item["red_ticks"])
            if green <= 0 or red <= 0:
                raise ValueError("green_ticks and red_ticks must be positive")
            signals.append(Signal(
                signal_id=signal_id,
                rsu_id=rsu,
                position=(float(item["position"][0]), float(item["position"][1])),
                green_ticks=green,
                red_ticks=red,
                phase_offset=int(_get(item, "phase_offset", 0)),
            ))
        except (ValueError, TypeError, IndexError) as exc:
            problems.add(sig_path, str(exc))

    routes = []
    routed = set()
    for i, item in enumerate(_get(raw, "routes", [])):
        route_path = f"{path}.routes[{i}]"
        if not _check_keys(item, {"vehicle", "speed_mps", "length_m",
                                  "depart_tick", "stops"},
                           {"vehicle", "speed_mps", "length_m"},
                           route_path, problems, strict):
            continue
        vehicle = check_node(item["vehicle"], f"{route_path}.vehicle")
        if vehicle in routed:
            problems.add(route_path, f"duplicate route for {vehicle!r}")
            continue
        routed.add(vehicle)
        stops = []
        stops_ok = True
        for j, stop in enumerate(_get(item, "stops", [])):
            stop_path = f"{route_path}.stops[{j}]"
            if not _check_keys(stop, {"signal", "at_m"}, {"signal", "at_m"},
                               stop_path, problems, strict):
                stops_ok = False
                continue
            signal_ref = str(stop["signal"])
            if signal_ref not in signal_ids:
                problems.add(stop_path, f"references unknown signal {signal_ref!r}")
                stops_ok = False
                continue
            stops.append((signal_ref, float(stop["at_m"])))
        if not stops_ok:
            continue
        try:
            routes.append(Route(
                vehicle=vehicle,
                speed_mps=float(item["speed_mps"]),
                length_m=float(item["length_m"]),
                stops=tuple(stops),
                depart_tick=int(_get(item, "depart_tick", 0)),
            ))
        except (SiovError, ValueError, TypeError) as exc:
            problems.add(route_path, str(exc))

    trust: dict[str, tuple[str, ...]] = {}
    raw_trust = _get(raw, "trust", {})
    if not isinstance(raw_trust, Mapping):
        problems.add(f"{path}.trust", "must map node ids to arrays of peer ids")
    else:
        for node_id, peers in raw_trust.items():
            check_node(node_id, f"{path}.trust")
            if not isinstance(peers, list):
                problems.add(f"{path}.trust.{node_id}", "must be an array of peer ids")
                continue
            trust[str(node_id)] = tuple(
                check_node(p, f"{path}.trust.{node_id}") for p in peers
            )

    platoons = []
    for i, item in enumerate(_get(raw, "platoons", [])):
        p_path = f"{path}.platoons[{i}]"
        if not _check_keys(item, {"leader", "members"}, {"leader", "members"},
                           p_path, problems, strict):
            continue
        leader = check_node(item["leader"], f"{p_path}.leader")
        members = [check_node(m, f"{p_path}.members") for m in item["members"]]
        platoons.append({"leader": leader, "members": members})

    schedule = []
    for i, item in enumerate(_get(raw, "schedule", [])):
        op_path = f"{path}.schedule[{i}]"
        if not isinstance(item, Mapping) or "op" not in item:
            problems.add(op_path, "each entry needs an 'op' field")
            continue
        op = item["op"]
        if op not in _SCHEDULE_KEYS:
            problems.add(op_path, f"unknown operation {op!r}")
            continue
        allowed, required = _SCHEDULE_KEYS[op]
        if not _check_keys(item, allowed, required, op_path, problems, strict):
            continue
        entry = {k: v for k, v in item.items() if k in allowed}
        for ref_key in ("node", "from", "to", "vehicle", "leader"):
            if ref_key in entry:
                check_node(entry[ref_key], f"{op_path}.{ref_key}")
        if op == "form_platoon":
            entry["members"] = [
                check_node(m, f"{op_path}.members") for m in entry["members"]
            ]
        if op == "request_right_of_way":
            for s in entry["path"]:
                if str(s) not in signal_ids:
                    problems.add(f"{op_path}.path",
                                 f"references unknown signal {s!r}")
        if not isinstance(entry.get("tick"), int) or entry["tick"] < 0:
            problems.add(f"{op_path}.tick", "must be a non-negative integer")
            continue
        schedule.append(entry)

    attacks = []
    for i, item in enumerate(_get(raw, "attacks", [])):
        a_path = f"{path}.attacks[{i}]"
        if not isinstance(item, Mapping) or "kind" not in item:
            problems.add(a_path, "each entry needs a 'kind' field")
            continue
        kind = item["kind"]
        if kind not in _ATTACK_KEYS:
            problems.add(a_path, f"unknown attack kind {kind!r}")
            continue
        allowed, required = _ATTACK_KEYS[kind]
        if not _check_keys(item, allowed, required, a_path, problems, strict):
            continue
        entry = {k: v for k, v in item.items() if k in allowed}
        for ref_key in ("origin", "target", "observer"):
            if ref_key in entry:
                check_node(entry[ref_key], f"{a_path}.{ref_key}")
        attacks.append(entry)

    def pos_int(key: str, default: int) -> int:
        value = _get(raw, key, default)
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            problems.add(f"{path}.{key}", f"must be a positive integer, got {value!r}")
            return default
        return value

    try:
        slow_speed = float(_get(raw, "slow_speed_mps", 5.0))
    except (TypeError, ValueError):
        problems.add(f"{path}.slow_speed_mps", "must be a number")
        slow_speed = 5.0

    return NetworkConfig(
        channel=channel,
        max_ticks=pos_int("max_ticks", 10_000),
        corroboration_k=pos_int("corroboration_k", 2),
        hold_window_ticks=pos_int("hold_window_ticks", 100),
        rate_limit_per_tick=pos_int("rate_limit_per_tick", 10),
        default_ttl_hops=pos_int("default_ttl_hops", 3),
        preemption_enabled=bool(_get(raw, "preemption_enabled", True)),
        slow_speed_mps=slow_speed,
        trust=trust,
        signals=tuple(signals),
        routes=tuple(routes),
        platoons=tuple(platoons),
        schedule=tuple(schedule),
        attacks=tuple(attacks),
    )


# -- serialization ----------------------------------------------------------


def scenario_to_dict(scenario: Scenario, *, seed: Optional[int] = None) -> dict:
    """Canonical dict form: every field explicit, defaults materialized."""
    effective_seed = scenario.seed if seed is None else seed
    doc: dict[str, Any] = {
        "schema_version": scenario.schema_version,
        "description": scenario.description,
        "entities": [
            {
                "id": e.entity_id,
                "kind": e.kind.value,
                "position": list(e.position),
                "speed_mps": e.speed_mps,
                "heading_deg": e.heading_deg,
                "mass_kg": e.mass_kg,
                "braking_distance_m": e.braking_distance_m,
                "safety_rating": e.safety_rating,
                "occupants": [{"age_years": o.age_years} for o in e.occupants],
                "role": e.role.value,
                "access_role": e.access_role,
            }
            for e in scenario.entities.values()
        ],
        "candidates": [
            {
                "id": c.action.action_id,
                "description": c.action.description,
                "self_damage_only": c.action.self_damage_only,
                "participants": [
                    {"entity": p.entity_id, "force_n": p.crash_force_n}
                    for p in c.action.participants
                ],
                **({"flags": dict(c.flag_overrides)} if c.flag_overrides else {}),
            }
            for c in scenario.candidates
        ],
    }
    if effective_seed is not None:
        doc["seed"] = effective_seed
    if scenario.rulebase is not None:
        doc["rulebase"] = {
            "version": scenario.rulebase.version,
            "community_id": scenario.rulebase.community_id,
            "laws": [
                {
                    "priority": law.priority,
                    "id": law.law_id,
                    "predicate": law.predicate_kind.value,
                    "description": law.description,
                }
                for law in scenario.rulebase.laws
            ],
        }
    if scenario.network is not None:
        net = scenario.network
        doc["network"] = {
            "channel": {
                "latency_s": net.channel.latency_s,
                "range_m": net.channel.range_m,
                "data_rate_mbps": net.channel.data_rate_mbps,
                "loss_probability": net.channel.loss_probability,
                "interference_windows": [
                    list(w) for w in net.channel.interference_windows
                ],
            },
            "max_ticks": net.max_ticks,
            "corroboration_k": net.corroboration_k,
            "hold_window_ticks": net.hold_window_ticks,
            "rate_limit_per_tick": net.rate_limit_per_tick,
            "default_ttl_hops": net.default_ttl_hops,
            "preemption_enabled": net.preemption_enabled,
            "slow_speed_mps": net.slow_speed_mps,
            "trust": {k: list(v) for k, v in net.trust.items()},
            "signals": [
                {
                    "id": s.signal_id,
                    "rsu": s.rsu_id,
                    "position": list(s.position),
                    "green_ticks": s.green_ticks,
                    "red_ticks": s.red_ticks,
                    "phase_offset": s.phase_offset,
                }
                for s in net.signals
            ],
            "routes": [
                {
                    "vehicle": r.vehicle,
                    "speed_mps": r.speed_mps,
                    "length_m": r.length_m,
                    "depart_tick": r.depart_tick,
                    "stops": [
                        {"signal": sig, "at_m": at} for sig, at in r.stops
                    ],
                }
                for r in net.routes
            ],
            "platoons": [dict(p) for p in net.platoons],
            "schedule": [dict(s) for s in net.schedule],
            "attacks": [dict(a) for a in net.attacks],
        }
    return doc


def serialize_scenario(scenario: Scenario) -> str:
    """Serialize so that ``parse_scenario(serialize_scenario(s)) == s``."""
    return json.dumps(scenario_to_dict(scenario), indent=2, sort_keys=True) + "\n"


def scenario_digest(scenario: Scenario, *, seed: Optional[int] = None) -> str:
    return digest(scenario_to_dict(scenario, seed=seed))


# -- execution ----------------------------------------------------------------


@dataclass
class RunResult:
    scenario_digest: str
    seed: int
    decision: Optional[Decision] = None
    report: Optional[DecisionReport] = None
    net_summary: Optional[dict] = None
    trace: list = field(default_factory=list)
    audit: AuditLog = field(default_factory=AuditLog)


def run_scenario(
    scenario: Scenario,
    *,
    seed: Optional[int] = None,
    rulebase: Optional[RuleBase] = None,
) -> RunResult:
    """Execute a scenario end to end, producing one audit chain.

    The decision (if candidates are present) is judged at logical time
    zero and recorded first; the network simulation (if configured)
    runs afterwards, appending its own records to the same chain.
    """
    if seed is not None:
        effective_seed = seed
    elif scenario.seed is not None:
        effective_seed = scenario.seed
    else:
        effective_seed = 0
    active_rulebase = rulebase or scenario.rulebase or default_rulebase()
    doc_digest = scenario_digest(scenario, seed=effective_seed)
    result = RunResult(scenario_digest=doc_digest, seed=effective_seed)

    if scenario.candidates:
        deciding = scenario.deciding_vehicle
        assert deciding is not None  # guaranteed by parse validation
        model = WorldModel(
            self_id=deciding.entity_id,
            entities=scenario.entities,
            last_seen={eid: 0 for eid in scenario.entities},
            rulebase_version=active_rulebase.version,
        )
        actions = [c.action for c in scenario.candidates]
        overrides = {
            c.action.action_id: c.overrides_dict()
            for c in scenario.candidates
            if c.flag_overrides is not None
        }
        decision = judge(model, actions, active_rulebase, overrides)
        result.decision = decision
        result.report = build_decision_report(
            decision, actions, scenario_digest=doc_digest, seed=effective_seed
        )
        flags_by_id = {
            c.action.action_id: (c.overrides_dict() or {})
            for c in scenario.candidates
        }
        verdict_by_id = dict(decision.verdicts)
        tuf_by_id = dict(decision.tuf_table)
        result.audit.append(
            RecordKind.DECISION,
            logical_time=0,
            inputs_digest=doc_digest,
            rulebase_version=decision.rulebase_version,
            chosen=decision.chosen.action_id,
            intermediates={
                "seed": effective_seed,
                "self_id": deciding.entity_id,
                "fallback_engaged": decision.fallback_engaged,
                "tie_break": decision.tie_break,
                "admissible": list(decision.admissible_ids),
                "candidates": [
                    {
                        "id": a.action_id,
                        "description": a.description,
                        "self_damage_only": a.self_damage_only,
                        "flag_overrides": flags_by_id[a.action_id],
                        "verdict": {
                            "status": verdict_by_id[a.action_id].status.value,
                            "violated_law": verdict_by_id[a.action_id].violated_law,
                            "violated_priority":
                                verdict_by_id[a.action_id].violated_priority,
                        },
                        "participants": [
                            {
                                "entity": p.entity_id,
                                "tev_u": p.tev_u,
                                "crash_force_n": p.crash_force_n,
                                "uf_un": p.uf_un,
                            }
                            for p in a.participants
                        ],
                        "tuf_un": tuf_by_id[a.action_id],
                        "chosen": a.action_id == decision.chosen.action_id,
                    }
                    for a in actions
                ],
            },
        )

    if scenario.network is not None:
        sim = NetworkSim(
            scenario.entities, scenario.network, effective_seed, result.audit
        )
        result.net_summary = sim.run()
        result.trace = sim.trace

    return result
