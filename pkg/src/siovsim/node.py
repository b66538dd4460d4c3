"""Per-vehicle control pipeline: sense, model, judge, act.

Raw sensor events are normalized into percepts, folded into an
immutable world-model snapshot, and — when an avoidance decision is
pending — judged through the rule filter and the least-total-harm
selector.  The emitted command is the only output; nodes never share
state, only messages.

A driver-impairment percept dominates everything: the tick that sees
one emits ``ReleaseDriverControl`` no matter what else is pending.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Optional, Sequence

from .entities import EntityKind, EntityState, NodeRole
from .errors import ConfigurationError, TopologyError
from .ethics import CandidateAction, select_min_tuf, total_utilitarian_force
from .rules import OutcomeFlags, RuleBase, Verdict, evaluate

#: Ticks after which an unrefreshed entity drops out of the world model.
DEFAULT_STALENESS_TICKS = 50


class PerceptKind(str, Enum):
    ENTITY_SIGHTED = "EntitySighted"
    DRIVER_IMPAIRMENT = "DriverImpairment"
    MESSAGE_RECEIVED = "MessageReceived"
    SIGNAL_STATE = "SignalState"


@dataclass(frozen=True)
class Percept:
    kind: PerceptKind
    source: str
    timestamp: int
    payload: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PerceptKind(self.kind))
        object.__setattr__(self, "payload", MappingProxyType(dict(self.payload)))


class CommandKind(str, Enum):
    SET_SPEED = "SetSpeed"
    SET_TRAJECTORY = "SetTrajectory"
    ESTABLISH_EMERGENCY_VANET = "EstablishEmergencyVanet"
    RELEASE_DRIVER_CONTROL = "ReleaseDriverControl"
    NO_OP = "NoOp"


@dataclass(frozen=True)
class Command:
    kind: CommandKind
    parameters: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", CommandKind(self.kind))
        object.__setattr__(self, "parameters", MappingProxyType(dict(self.parameters)))


_REQUIRED_EVENT_FIELDS = ("kind", "source", "timestamp")


def normalize_sensor_events(
    raw_events: Iterable[Mapping[str, Any]],
) -> tuple[list[Percept], int]:
    """Turn raw sensor records into ordered, deduplicated percepts.

    Records missing a field or naming an unknown kind are dropped (the
    count of drops is returned).  Two records from the same source with
    the same timestamp are duplicates; the first wins.  Output is
    ordered by timestamp, input order breaking ties, so downstream
    folding is deterministic.
    """
    percepts: list[Percept] = []
    malformed = 0
    seen: set[tuple[str, int]] = set()
    for raw in raw_events:
        if not isinstance(raw, Mapping) or any(
            key not in raw for key in _REQUIRED_EVENT_FIELDS
        ):
            malformed += 1
            continue
        try:
            kind = PerceptKind(raw["kind"])
            source = str(raw["source"])
            timestamp = int(raw["timestamp"])
        except (ValueError, TypeError):
            malformed += 1
            continue
        if timestamp < 0:
            malformed += 1
            continue
        key = (source, timestamp)
        if key in seen:
            continue
        seen.add(key)
        percepts.append(
            Percept(kind, source, timestamp, dict(raw.get("payload") or {}))
        )
    percepts.sort(key=lambda p: p.timestamp)
    return percepts, malformed


@dataclass(frozen=True)
class WorldModel:
    """Immutable snapshot of everything a node currently believes."""

    self_id: str
    tick: int = 0
    entities: Mapping[str, EntityState] = field(default_factory=dict)
    last_seen: Mapping[str, int] = field(default_factory=dict)
    signals: Mapping[str, str] = field(default_factory=dict)
    rulebase_version: int = 1
    driver_impaired: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "entities", MappingProxyType(dict(self.entities)))
        object.__setattr__(self, "last_seen", MappingProxyType(dict(self.last_seen)))
        object.__setattr__(self, "signals", MappingProxyType(dict(self.signals)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WorldModel):
            return NotImplemented
        return (
            self.self_id == other.self_id
            and self.tick == other.tick
            and dict(self.entities) == dict(other.entities)
            and dict(self.last_seen) == dict(other.last_seen)
            and dict(self.signals) == dict(other.signals)
            and self.rulebase_version == other.rulebase_version
            and self.driver_impaired == other.driver_impaired
        )


def update_world_model(
    model: WorldModel,
    percepts: Sequence[Percept],
    *,
    staleness_ticks: int = DEFAULT_STALENESS_TICKS,
) -> WorldModel:
    """Fold percepts into a new snapshot; the old one is untouched.

    Entities not refreshed within ``staleness_ticks`` of the newest
    timestamp are evicted — a sighting that old says nothing about
    where the object is now.
    """
    entities = dict(model.entities)
    last_seen = dict(model.last_seen)
    signals = dict(model.signals)
    tick = model.tick
    impaired = model.driver_impaired

    for percept in percepts:
        tick = max(tick, percept.timestamp)
        if percept.kind is PerceptKind.ENTITY_SIGHTED:
            entity = percept.payload.get("entity")
            if not isinstance(entity, EntityState):
                raise ConfigurationError(
                    "EntitySighted percepts carry an EntityState under 'entity'"
                )
            entities[entity.entity_id] = entity
            last_seen[entity.entity_id] = percept.timestamp
        elif percept.kind is PerceptKind.SIGNAL_STATE:
            signal_id = str(percept.payload.get("signal", percept.source))
            signals[signal_id] = str(percept.payload.get("state", "unknown"))
        elif percept.kind is PerceptKind.DRIVER_IMPAIRMENT:
            impaired = True
        # MessageReceived percepts are routed to the messaging layer by
        # the node loop; they do not change the physical picture.

    horizon = tick - staleness_ticks
    for entity_id, seen_at in list(last_seen.items()):
        if seen_at < horizon:
            del last_seen[entity_id]
            entities.pop(entity_id, None)

    return WorldModel(
        self_id=model.self_id,
        tick=tick,
        entities=entities,
        last_seen=last_seen,
        signals=signals,
        rulebase_version=model.rulebase_version,
        driver_impaired=impaired,
    )


def derive_outcome_flags(
    candidate: CandidateAction,
    entities: Mapping[str, EntityState],
    self_id: str,
    overrides: Optional[Mapping[str, Any]] = None,
) -> OutcomeFlags:
    """Read a candidate's rule-relevant properties off its participants.

    Anything carrying ethical value that receives force counts as human
    injury; force on an animal entity counts as animal injury; force on
    the deciding vehicle in a self-damage-only option risks the vehicle
    itself.  ``overrides`` (from the scenario author) wins over the
    derived value for any flag it names — judgement facts like "this
    option disobeys the driver" are not derivable from kinematics.
    """
    injures_human = False
    injures_animal = False
    destroys_self = False
    for part in candidate.participants:
        if part.crash_force_n <= 0:
            continue
        entity = entities.get(part.entity_id)
        if part.tev_u > 0:
            injures_human = True
        if entity is not None and entity.kind is EntityKind.ANIMAL:
            injures_animal = True
        if part.entity_id == self_id and candidate.self_damage_only:
            destroys_self = True

    flags = {
        "injures_human": injures_human,
        "injures_animal": injures_animal,
        "contradicts_driver_order": False,
        "destroys_self": destroys_self,
        "violates_traffic_or_papa": False,
        "order_obedience_violates": None,
        "self_protection_violates": None,
    }
    for key, value in (overrides or {}).items():
        if key not in flags:
            raise ConfigurationError(f"unknown outcome flag {key!r}")
        flags[key] = value
    return OutcomeFlags(**flags)


@dataclass(frozen=True)
class Decision:
    """Judgement output: the pick plus everything needed to audit it."""

    chosen: CandidateAction
    verdicts: tuple[tuple[str, Verdict], ...]
    tuf_table: tuple[tuple[str, float], ...]
    admissible_ids: tuple[str, ...]
    fallback_engaged: bool
    tie_break: Optional[str]
    rulebase_version: int


def judge(
    model: WorldModel,
    candidates: Sequence[CandidateAction],
    rulebase: RuleBase,
    flag_overrides: Optional[Mapping[str, Mapping[str, Any]]] = None,
) -> Decision:
    """Rule filter first, least total harm second.

    Pure: same snapshot, candidates, and rule base always produce the
    same decision.  Every candidate's TUF and verdict are returned so
    the audit record can show the full reasoning, not just the winner.
    """
    if not candidates:
        raise ConfigurationError("judge needs at least one candidate action")
    overrides = flag_overrides or {}
    judged: list[tuple[CandidateAction, OutcomeFlags, Verdict]] = []
    for cand in candidates:
        flags = derive_outcome_flags(
            cand, model.entities, model.self_id, overrides.get(cand.action_id)
        )
        judged.append((cand, flags, evaluate(flags, rulebase)))

    clean = [cand for cand, _, verdict in judged if verdict.permitted]
    fallback = not clean
    if clean:
        admissible = clean
    else:
        # Least-severe violators: keep the candidates whose most binding
        # violated priority is numerically largest, so a choice exists
        # even when every option breaks some law.
        least_severe = max(v.violated_priority for _, _, v in judged)
        admissible = [c for c, _, v in judged if v.violated_priority == least_severe]

    chosen, _ = select_min_tuf(admissible)
    full_table = tuple((c.action_id, total_utilitarian_force(c)) for c, _, _ in judged)

    tuf_by_id = dict(full_table)
    min_tuf = min(tuf_by_id[c.action_id] for c in admissible)
    at_min = [c for c in admissible if tuf_by_id[c.action_id] == min_tuf]
    tie_break = None
    if len(at_min) > 1:
        self_damage = [c for c in at_min if c.self_damage_only]
        tie_break = "self_damage_only" if len(self_damage) == 1 else "action_id"

    return Decision(
        chosen=chosen,
        verdicts=tuple((c.action_id, v) for c, _, v in judged),
        tuf_table=full_table,
        admissible_ids=tuple(c.action_id for c in admissible),
        fallback_engaged=fallback,
        tie_break=tie_break,
        rulebase_version=rulebase.version,
    )


def generate_behavior(
    decision: Optional[Decision] = None,
    *,
    impairment: bool = False,
) -> Command:
    """Translate the node's state for this tick into one actuator command."""
    if impairment:
        return Command(CommandKind.RELEASE_DRIVER_CONTROL, {"reason": "impairment"})
    if decision is not None:
        return Command(
            CommandKind.SET_TRAJECTORY, {"action_id": decision.chosen.action_id}
        )
    return Command(CommandKind.NO_OP)


#: Roles that direct subordinates; everyone else is a leaf.
_LEADER_ROLES = frozenset({
    NodeRole.PLATOON_LEADER,
    NodeRole.RSU_FIXED,
    NodeRole.EMERGENCY_TACTICAL,
})


def decompose_command(
    node_id: str,
    role: NodeRole,
    subordinates: Sequence[str],
    command: Command,
) -> list[tuple[str, Command]]:
    """Fan a command out one hierarchy level.

    Leaders forward the command to each registered subordinate; leaf
    roles return nothing.  A node listed among its own subordinates is
    a wiring error, not a fan-out.
    """
    if node_id in subordinates:
        raise TopologyError(f"node {node_id!r} is subordinate to itself")
    if role not in _LEADER_ROLES:
        return []
    return [(sub_id, command) for sub_id in subordinates]


class Hierarchy:
    """A forest of command relationships with cycle rejection."""

    def __init__(self) -> None:
        self._parent: dict[str, str] = {}
        self._children: dict[str, list[str]] = {}

    def add(self, parent: str, child: str) -> None:
        if parent == child:
            raise TopologyError(f"node {parent!r} cannot command itself")
        # Walk up from the parent; finding the child there means the
        # new edge would close a loop.
        cursor: Optional[str] = parent
        while cursor is not None:
            if cursor == child:
                raise TopologyError(
                    f"adding {child!r} under {parent!r} would create a cycle"
                )
            cursor = self._parent.get(cursor)
        old_parent = self._parent.get(child)
        if old_parent is not None:
            self._children[old_parent].remove(child)
        self._parent[child] = parent
        self._children.setdefault(parent, []).append(child)

    def remove(self, child: str) -> None:
        parent = self._parent.pop(child, None)
        if parent is not None:
            self._children[parent].remove(child)

    def subordinates(self, parent: str) -> list[str]:
        return list(self._children.get(parent, ()))


class RcsNode:
    """One vehicle's control loop over its own private state.

    ``jv_authority`` selects whether judgements drive the actuators
    directly (``"autonomous"``) or are only surfaced to the human as
    recommendations (``"advisory"``); advisory nodes emit ``NoOp``
    commands and queue their recommendations on ``advisories``.
    """

    def __init__(
        self,
        node_id: str,
        rulebase: RuleBase,
        *,
        role: NodeRole = NodeRole.VEHICLE_DYNAMIC,
        staleness_ticks: int = DEFAULT_STALENESS_TICKS,
        jv_authority: str = "autonomous",
    ) -> None:
        if jv_authority not in ("autonomous", "advisory"):
            raise ConfigurationError(
                f"jv_authority must be 'autonomous' or 'advisory', got {jv_authority!r}"
            )
        self.node_id = node_id
        self.role = NodeRole(role)
        self.rulebase = rulebase
        self.staleness_ticks = staleness_ticks
        self.jv_authority = jv_authority
        self.world = WorldModel(self_id=node_id, rulebase_version=rulebase.version)
        self.subordinates: list[str] = []
        self.malformed_events = 0
        self.last_decision: Optional[Decision] = None
        self.advisories: list[dict[str, Any]] = []
        self.inbox: list[Percept] = []

    def process_sensors(self, raw_events: Iterable[Mapping[str, Any]]) -> list[Percept]:
        percepts, malformed = normalize_sensor_events(raw_events)
        self.malformed_events += malformed
        return percepts

    def update_world_model(self, percepts: Sequence[Percept]) -> WorldModel:
        self.world = update_world_model(
            self.world, percepts, staleness_ticks=self.staleness_ticks
        )
        return self.world

    def judge(
        self,
        candidates: Sequence[CandidateAction],
        flag_overrides: Optional[Mapping[str, Mapping[str, Any]]] = None,
    ) -> Decision:
        decision = judge(self.world, candidates, self.rulebase, flag_overrides)
        self.last_decision = decision
        return decision

    def decompose_command(self, command: Command) -> list[tuple[str, Command]]:
        return decompose_command(self.node_id, self.role, self.subordinates, command)

    def tick(
        self,
        raw_events: Iterable[Mapping[str, Any]] = (),
        candidates: Sequence[CandidateAction] = (),
        flag_overrides: Optional[Mapping[str, Mapping[str, Any]]] = None,
    ) -> Command:
        """Run one full sense-model-judge-act cycle."""
        percepts = self.process_sensors(raw_events)
        self.update_world_model(percepts)
        impaired = any(p.kind is PerceptKind.DRIVER_IMPAIRMENT for p in percepts)
        self.inbox.extend(
            p for p in percepts if p.kind is PerceptKind.MESSAGE_RECEIVED
        )
        if impaired:
            return generate_behavior(impairment=True)
        if candidates:
            decision = self.judge(candidates, flag_overrides)
            if self.jv_authority == "advisory":
                self.advisories.append({
                    "tick": self.world.tick,
                    "recommended_action": decision.chosen.action_id,
                    "rulebase_version": decision.rulebase_version,
                })
                return Command(CommandKind.NO_OP, {"advisory": True})
            return generate_behavior(decision)
        return generate_behavior()
