"""Deterministic discrete-event simulator for the vehicle network.

Everything runs on a logical clock (one tick = 10 ms).  Events live in
a queue ordered by (tick, insertion sequence); all randomness — only
message loss uses any — comes from one seeded generator, drawn in
event order, so a (seed, config) pair always yields the same trace,
byte for byte.

Modelled behaviour: DSRC-style broadcast with a 1 km range and 0.02 s
latency, flood suppression via per-node seen-caches, accident-report
corroboration at roadside units, privacy/accuracy/property/access
checks with quarantine, platoon formation with leader-routed external
traffic, emergency right-of-way preemption of traffic signals, and
three scripted attacks (flooding, false reporting, eavesdropping).
"""

from __future__ import annotations

import heapq
import logging
import math
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Optional, Sequence

from .audit import AuditLog, RecordKind
from .entities import EntityKind, EntityState, NodeRole
from .errors import (
    AddressingError,
    ConfigurationError,
    MembershipError,
    RoutingError,
)
from .node import Command, CommandKind, decompose_command

log = logging.getLogger(__name__)

#: Length of one logical tick, in seconds.
TICK_SECONDS = 0.01

#: Per-sender messages a node will accept from one peer in one tick.
DEFAULT_RATE_LIMIT_PER_TICK = 10

#: Independent origins required before an accident report is believed.
DEFAULT_CORROBORATION_K = 2

#: Ticks an uncorroborated report is held before it expires.
DEFAULT_HOLD_WINDOW_TICKS = 100

DEFAULT_TTL_HOPS = 3


class MessageKind(str, Enum):
    TRAFFIC_CONGESTION = "TrafficCongestion"
    ACCIDENT_REPORT = "AccidentReport"
    EMERGENCY_RIGHT_OF_WAY = "EmergencyRightOfWay"
    EVENT_BROADCAST = "EventBroadcast"
    PLATOON_CONTROL = "PlatoonControl"
    ADVISORY = "Advisory"


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle; the area for which a message holds."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise ConfigurationError("region bounds are inverted")

    def contains(self, point: Sequence[float]) -> bool:
        x, y = point
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True)
class PapaPolicy:
    """Information-norm tags carried by every message."""

    privacy_consent: bool = True
    provenance: str = ""
    owner: str = ""
    acl: tuple[str, ...] = ("any",)

    def __post_init__(self) -> None:
        object.__setattr__(self, "acl", tuple(self.acl))


@dataclass(frozen=True)
class Message:
    origin: str
    msg_id: int
    kind: MessageKind
    payload: Mapping[str, Any] = field(default_factory=dict)
    ttl_hops: int = 0
    context_region: Optional[Region] = None
    papa: PapaPolicy = PapaPolicy()
    sent_tick: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", MessageKind(self.kind))
        object.__setattr__(self, "payload", MappingProxyType(dict(self.payload)))
        if self.ttl_hops < 0:
            raise ConfigurationError("ttl_hops must be >= 0")

    @property
    def dedup_key(self) -> Any:
        """Identity used by the suppression cache.

        Event broadcasts about the same physical event share the
        payload ``event_id`` even when different witnesses originate
        them, so a node handles the event once no matter how many
        copies arrive.  Every other kind deduplicates per message —
        accident reports in particular must each reach the
        corroboration logic, since distinct origins are the point.
        """
        event_id = self.payload.get("event_id")
        if self.kind is MessageKind.EVENT_BROADCAST and event_id is not None:
            return ("event", event_id)
        return ("msg", self.origin, self.msg_id)


def papa_check(receiver_access_role: str, msg: Message) -> list[str]:
    """Return the list of violated information norms (empty = pass)."""
    violations = []
    if msg.payload.get("personal_data") and not msg.papa.privacy_consent:
        violations.append("Privacy")
    if not msg.papa.provenance:
        violations.append("Accuracy")
    modified_owner = msg.payload.get("modifies_owned_by")
    if modified_owner is not None and modified_owner != msg.papa.owner:
        violations.append("Property")
    if "any" not in msg.papa.acl and receiver_access_role not in msg.papa.acl:
        violations.append("Accessibility")
    return violations


@dataclass(frozen=True)
class Channel:
    """Radio parameters; the data rate is descriptive, not simulated."""

    latency_s: float = 0.02
    range_m: float = 1000.0
    data_rate_mbps: float = 27.0
    loss_probability: float = 0.0
    interference_windows: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        if self.latency_s < 0:
            raise ConfigurationError("latency must be >= 0")
        if self.range_m <= 0:
            raise ConfigurationError("range must be positive")
        if not (3.0 <= self.data_rate_mbps <= 27.0):
            raise ConfigurationError("data rate must lie in 3..27 Mbps")
        if not (0.0 <= self.loss_probability <= 1.0):
            raise ConfigurationError("loss probability must lie in [0, 1]")
        windows = tuple((int(a), int(b)) for a, b in self.interference_windows)
        for start, end in windows:
            if end < start:
                raise ConfigurationError("interference window is inverted")
        object.__setattr__(self, "interference_windows", windows)

    @property
    def latency_ticks(self) -> int:
        """Latency quantized to the tick grid (0.02 s -> 2 ticks)."""
        return int(round(self.latency_s / TICK_SECONDS))

    def interfered(self, tick: int) -> bool:
        return any(start <= tick < end for start, end in self.interference_windows)


class EventQueue:
    """Min-queue of (tick, sequence, event); FIFO within a tick."""

    def __init__(self) -> None:
        self._heap: list[tuple[int, int, dict]] = []
        self._seq = 0

    def push(self, tick: int, event: dict) -> None:
        heapq.heappush(self._heap, (tick, self._seq, event))
        self._seq += 1

    def __len__(self) -> int:
        return len(self._heap)

    def peek_tick(self) -> Optional[int]:
        return self._heap[0][0] if self._heap else None

    def pop_tick(self) -> tuple[int, list[dict]]:
        """Remove and return every event scheduled for the next tick.

        Events pushed for that same tick while it is being processed are
        picked up by the caller via repeated peeking, preserving
        insertion order.
        """
        if not self._heap:
            raise ConfigurationError("queue is empty")
        tick = self._heap[0][0]
        events = []
        while self._heap and self._heap[0][0] == tick:
            events.append(heapq.heappop(self._heap)[2])
        return tick, events


@dataclass
class Signal:
    """A traffic signal on a fixed green/red program, overridable."""

    signal_id: str
    rsu_id: str
    position: tuple[float, float]
    green_ticks: int
    red_ticks: int
    phase_offset: int = 0
    override: Optional[str] = None  # "green" while preempted, else None
    overridden_by: Optional[str] = None

    def program_green(self, tick: int) -> bool:
        cycle = self.green_ticks + self.red_ticks
        return (tick + self.phase_offset) % cycle < self.green_ticks

    def is_green(self, tick: int) -> bool:
        return self.override == "green" or self.program_green(tick)

    def next_green_tick(self, tick: int) -> int:
        if self.is_green(tick):
            return tick
        cycle = self.green_ticks + self.red_ticks
        position = (tick + self.phase_offset) % cycle
        return tick + cycle - position


@dataclass
class Route:
    """One vehicle's scripted traversal along a signalled road."""

    vehicle: str
    speed_mps: float
    length_m: float
    stops: tuple[tuple[str, float], ...]  # (signal_id, offset from start)
    depart_tick: int = 0

    def __post_init__(self) -> None:
        if self.speed_mps <= 0:
            raise ConfigurationError(f"route {self.vehicle!r}: speed must be positive")
        stops = tuple(sorted(self.stops, key=lambda s: s[1]))
        for _, at in stops:
            if not (0 <= at <= self.length_m):
                raise ConfigurationError(
                    f"route {self.vehicle!r}: stop offset {at} outside the route"
                )
        self.stops = stops


@dataclass
class NetworkConfig:
    channel: Channel = Channel()
    max_ticks: int = 10_000
    corroboration_k: int = DEFAULT_CORROBORATION_K
    hold_window_ticks: int = DEFAULT_HOLD_WINDOW_TICKS
    rate_limit_per_tick: int = DEFAULT_RATE_LIMIT_PER_TICK
    default_ttl_hops: int = DEFAULT_TTL_HOPS
    preemption_enabled: bool = True
    slow_speed_mps: float = 5.0
    trust: dict[str, tuple[str, ...]] = field(default_factory=dict)
    signals: tuple[Signal, ...] = ()
    routes: tuple[Route, ...] = ()
    platoons: tuple[dict, ...] = ()
    schedule: tuple[dict, ...] = ()
    attacks: tuple[dict, ...] = ()


@dataclass
class SimNode:
    entity: EntityState
    role: NodeRole
    trusted: Optional[frozenset[str]]
    seen: set = field(default_factory=set)
    processed: dict = field(default_factory=dict)
    inbound_usage: dict = field(default_factory=dict)  # sender -> (tick, used)
    platoon_id: Optional[str] = None
    applied_speeds: list = field(default_factory=list)

    @property
    def node_id(self) -> str:
        return self.entity.entity_id

    @property
    def position(self) -> tuple[float, float]:
        return self.entity.position


@dataclass(frozen=True)
class PreemptionOutcome:
    granted: bool
    vehicle: str
    signal_ids: tuple[str, ...]
    reason: str = ""
    plan_id: Optional[str] = None


@dataclass
class AttackHandle:
    attack_id: str
    kind: str
    params: dict
    observations: list = field(default_factory=list)


def _distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


class NetworkSim:
    """One simulation instance; single-threaded, deterministic."""

    def __init__(
        self,
        entities: Mapping[str, EntityState] | Iterable[EntityState],
        config: NetworkConfig,
        seed: int = 0,
        audit_log: Optional[AuditLog] = None,
    ) -> None:
        if not isinstance(entities, Mapping):
            entities = {e.entity_id: e for e in entities}
        self.config = config
        self.channel = config.channel
        self.rng = random.Random(seed)
        self.seed = seed
        self.audit_log = audit_log if audit_log is not None else AuditLog()
        self.queue = EventQueue()
        self.tick = 0
        self.trace: list[dict] = []
        self._trace_seq = 0

        self.nodes: dict[str, SimNode] = {}
        for entity in entities.values():
            if entity.is_networked:
                trusted = config.trust.get(entity.entity_id)
                self.nodes[entity.entity_id] = SimNode(
                    entity=entity,
                    role=entity.role,
                    trusted=frozenset(trusted) if trusted is not None else None,
                )

        self.signals: dict[str, Signal] = {}
        for signal in config.signals:
            if signal.rsu_id not in self.nodes:
                raise ConfigurationError(
                    f"signal {signal.signal_id!r} names unknown roadside unit "
                    f"{signal.rsu_id!r}"
                )
            self.signals[signal.signal_id] = replace(signal)

        self.routes: dict[str, Route] = {}
        for route in config.routes:
            if route.vehicle not in self.nodes:
                raise ConfigurationError(
                    f"route names unknown vehicle {route.vehicle!r}"
                )
            for signal_id, _ in route.stops:
                if signal_id not in self.signals:
                    raise ConfigurationError(
                        f"route for {route.vehicle!r} names unknown signal "
                        f"{signal_id!r}"
                    )
            self.routes[route.vehicle] = route
            self.queue.push(route.depart_tick, {"op": "depart", "vehicle": route.vehicle})

        self._msg_counters: dict[str, int] = {}
        self.platoons: dict[str, dict] = {}
        self._platoon_counter = 0
        self._plans: dict[str, dict] = {}
        self._plan_counter = 0
        self._held: dict[tuple[str, Any], dict] = {}  # (rsu, event key) -> state
        self._promoted: set[tuple[str, Any]] = set()
        self.attacks: list[AttackHandle] = []
        self._eavesdroppers: list[str] = []
        self.counters: dict[str, int] = {
            "transmissions": 0,
            "broadcast_transmissions": 0,
            "deliveries": 0,
            "processed": 0,
            "duplicates_ignored": 0,
            "quarantined": 0,
            "papa_violations": 0,
            "promotions": 0,
            "reports_expired": 0,
            "preemptions_granted": 0,
            "preemptions_denied": 0,
            "eavesdrop_reads": 0,
            "privacy_exposures": 0,
        }
        self.drops: dict[str, int] = {}
        self.traversal_ticks: dict[str, int] = {}
        self._depart_ticks: dict[str, int] = {}

        for formation in config.platoons:
            self.form_platoon(formation["leader"], formation["members"])
        for op in config.schedule:
            op = dict(op)
            tick = int(op.pop("tick"))
            self.queue.push(tick, {"schedule": op})
        for attack in config.attacks:
            self.inject_attack(attack["kind"], {k: v for k, v in attack.items() if k != "kind"})

    # -- tracing ---------------------------------------------------------

    def _record(self, event: str, node: str = "", *, origin: str = "",
                msg_id: Any = "", kind: str = "", detail: str = "") -> None:
        self.trace.append({
            "tick": self.tick,
            "seq": self._trace_seq,
            "event": event,
            "node": node,
            "origin": origin,
            "msg_id": msg_id,
            "kind": kind,
            "detail": detail,
        })
        self._trace_seq += 1

    def _drop(self, reason: str, node: str, msg: Message, detail: str = "") -> None:
        self.drops[reason] = self.drops.get(reason, 0) + 1
        extra = f";{detail}" if detail else ""
        self._record(
            "DROP", node, origin=msg.origin, msg_id=msg.msg_id,
            kind=msg.kind.value, detail=f"reason={reason}{extra}",
        )

    # -- message construction -------------------------------------------

    def make_message(
        self,
        origin: str,
        kind: MessageKind | str,
        payload: Optional[Mapping[str, Any]] = None,
        *,
        ttl_hops: Optional[int] = None,
        context_region: Optional[Region] = None,
        papa: Optional[PapaPolicy] = None,
    ) -> Message:
        if origin not in self.nodes:
            raise AddressingError(f"unknown origin {origin!r}")
        counter = self._msg_counters.get(origin, 0)
        self._msg_counters[origin] = counter + 1
        if papa is None:
            papa = PapaPolicy(provenance=origin, owner=origin)
        return Message(
            origin=origin,
            msg_id=counter,
            kind=MessageKind(kind),
            payload=payload or {},
            ttl_hops=self.config.default_ttl_hops if ttl_hops is None else ttl_hops,
            context_region=context_region,
            papa=papa,
            sent_tick=self.tick,
        )

    # -- transmission ----------------------------------------------------

    def send(self, sender_id: str, recipient_id: str, msg: Message) -> None:
        """Unicast; platoon members reach external peers via their leader."""
        if sender_id not in self.nodes:
            raise AddressingError(f"unknown sender {sender_id!r}")
        if recipient_id not in self.nodes:
            raise AddressingError(f"unknown recipient {recipient_id!r}")
        sender = self.nodes[sender_id]
        if (
            sender.platoon_id is not None
            and sender.role is NodeRole.PLATOON_MEMBER
            and not self._same_platoon(sender_id, recipient_id)
        ):
            leader = self.platoons[sender.platoon_id]["leader"]
            self._record(
                "RELAY_VIA_LEADER", sender_id, origin=msg.origin,
                msg_id=msg.msg_id, kind=msg.kind.value,
                detail=f"leader={leader};final={recipient_id}",
            )
            self._transmit(sender_id, leader, msg, relay_to=recipient_id)
            return
        self._transmit(sender_id, recipient_id, msg)

    def _same_platoon(self, a: str, b: str) -> bool:
        pa = self.nodes[a].platoon_id
        return pa is not None and pa == self.nodes[b].platoon_id

    def _transmit(
        self,
        sender_id: str,
        recipient_id: str,
        msg: Message,
        *,
        relay_to: Optional[str] = None,
        count_emission: bool = True,
    ) -> None:
        """One radio emission toward one recipient.

        The sender gets no confirmation of any kind: a drop is recorded
        for the observer of the trace, not reported back.
        """
        sender = self.nodes[sender_id]
        recipient = self.nodes[recipient_id]
        if count_emission:
            self.counters["transmissions"] += 1
            self._record(
                "SEND", sender_id, origin=msg.origin, msg_id=msg.msg_id,
                kind=msg.kind.value, detail=f"to={recipient_id}",
            )
            self._observe_emission(sender_id, msg)
        distance = _distance(sender.position, recipient.position)
        if distance > self.channel.range_m:
            self._drop("out_of_range", sender_id, msg, f"to={recipient_id}")
            return
        if self.channel.interfered(self.tick):
            self._drop("interference", sender_id, msg, f"to={recipient_id}")
            return
        if (
            self.channel.loss_probability > 0
            and self.rng.random() < self.channel.loss_probability
        ):
            self._drop("loss", sender_id, msg, f"to={recipient_id}")
            return
        self.queue.push(
            self.tick + self.channel.latency_ticks,
            {
                "op": "deliver",
                "recipient": recipient_id,
                "sender": sender_id,
                "msg": msg,
                "relay_to": relay_to,
            },
        )

    def broadcast_with_suppression(self, origin_id: str, msg: Message) -> None:
        """One broadcast emission reaching every node in radio range."""
        if origin_id not in self.nodes:
            raise AddressingError(f"unknown origin {origin_id!r}")
        sender = self.nodes[origin_id]
        if (
            sender.platoon_id is not None
            and sender.role is NodeRole.PLATOON_MEMBER
        ):
            leader = self.platoons[sender.platoon_id]["leader"]
            self._record(
                "RELAY_VIA_LEADER", origin_id, origin=msg.origin,
                msg_id=msg.msg_id, kind=msg.kind.value,
                detail=f"leader={leader};final=broadcast",
            )
            self._transmit(origin_id, leader, msg, relay_to="*")
            return
        self._broadcast_emission(origin_id, msg)

    def _broadcast_emission(self, sender_id: str, msg: Message) -> None:
        sender = self.nodes[sender_id]
        self.counters["transmissions"] += 1
        self.counters["broadcast_transmissions"] += 1
        self._record(
            "BROADCAST", sender_id, origin=msg.origin, msg_id=msg.msg_id,
            kind=msg.kind.value, detail=f"ttl={msg.ttl_hops}",
        )
        self._observe_emission(sender_id, msg)
        if self.channel.interfered(self.tick):
            self._drop("interference", sender_id, msg, "to=broadcast")
            return
        for node_id, node in self.nodes.items():
            if node_id == sender_id:
                continue
            if _distance(sender.position, node.position) > self.channel.range_m:
                continue
            if (
                self.channel.loss_probability > 0
                and self.rng.random() < self.channel.loss_probability
            ):
                self._drop("loss", sender_id, msg, f"to={node_id}")
                continue
            self.queue.push(
                self.tick + self.channel.latency_ticks,
                {"op": "deliver", "recipient": node_id, "sender": sender_id,
                 "msg": msg, "relay_to": None},
            )

    def _observe_emission(self, sender_id: str, msg: Message) -> None:
        """Passive listeners hear every emission within range."""
        if not self._eavesdroppers:
            return
        sender = self.nodes[sender_id]
        for handle in self.attacks:
            if handle.kind != "Eavesdrop":
                continue
            observer_id = handle.params["observer"]
            if observer_id == sender_id:
                continue
            observer = self.nodes[observer_id]
            if _distance(sender.position, observer.position) > self.channel.range_m:
                continue
            personal = bool(msg.payload.get("personal_data"))
            exposed = personal and (
                "any" not in msg.papa.acl
                and observer.entity.access_role not in msg.papa.acl
                or not msg.papa.privacy_consent
            )
            handle.observations.append({
                "tick": self.tick,
                "origin": msg.origin,
                "msg_id": msg.msg_id,
                "kind": msg.kind.value,
                "personal_data": personal,
                "privacy_exposure": exposed,
            })
            self.counters["eavesdrop_reads"] += 1
            if exposed:
                self.counters["privacy_exposures"] += 1
                self._record(
                    "PRIVACY_EXPOSURE", observer_id, origin=msg.origin,
                    msg_id=msg.msg_id, kind=msg.kind.value,
                    detail=f"observer={observer_id}",
                )

    # -- delivery and processing -----------------------------------------

    def _handle_deliver(self, event: dict) -> None:
        recipient_id = event["recipient"]
        sender_id = event["sender"]
        msg: Message = event["msg"]
        node = self.nodes[recipient_id]

        # Inbound rate limit, per sender, reset each tick.
        tick_used = node.inbound_usage.get(sender_id)
        used = tick_used[1] if tick_used and tick_used[0] == self.tick else 0
        if used >= self.config.rate_limit_per_tick:
            self._drop("rate_limited", recipient_id, msg, f"from={sender_id}")
            return
        node.inbound_usage[sender_id] = (self.tick, used + 1)

        if node.trusted is not None and msg.origin not in node.trusted:
            self._drop("untrusted", recipient_id, msg, f"from={sender_id}")
            return

        if msg.context_region is not None and not msg.context_region.contains(
            node.position
        ):
            self._drop("outside_context", recipient_id, msg)
            return

        violations = papa_check(node.entity.access_role, msg)
        if violations:
            self.counters["quarantined"] += 1
            self.counters["papa_violations"] += len(violations)
            self._record(
                "QUARANTINE", recipient_id, origin=msg.origin, msg_id=msg.msg_id,
                kind=msg.kind.value, detail="violations=" + "|".join(violations),
            )
            self.audit_log.append(
                RecordKind.PAPA_VIOLATION,
                logical_time=self.tick,
                intermediates={
                    "receiver": recipient_id,
                    "origin": msg.origin,
                    "msg_id": msg.msg_id,
                    "message_kind": msg.kind.value,
                    "violations": violations,
                },
                rulebase_version=0,
            )
            return

        self.counters["deliveries"] += 1
        self._record(
            "DELIVER", recipient_id, origin=msg.origin, msg_id=msg.msg_id,
            kind=msg.kind.value, detail=f"from={sender_id}",
        )

        relay_to = event.get("relay_to")
        if relay_to is not None:
            if relay_to == "*":
                self._broadcast_emission(recipient_id, msg)
            else:
                self._transmit(recipient_id, relay_to, msg)
            return

        if msg.dedup_key in node.seen:
            self.counters["duplicates_ignored"] += 1
            self._record(
                "DUPLICATE_IGNORED", recipient_id, origin=msg.origin,
                msg_id=msg.msg_id, kind=msg.kind.value,
            )
            return
        node.seen.add(msg.dedup_key)
        node.processed[msg.dedup_key] = node.processed.get(msg.dedup_key, 0) + 1
        self.counters["processed"] += 1
        self._record(
            "PROCESS", recipient_id, origin=msg.origin, msg_id=msg.msg_id,
            kind=msg.kind.value,
        )

        if msg.kind is MessageKind.EVENT_BROADCAST:
            remaining = msg.ttl_hops - 1
            if remaining > 0:
                self._broadcast_emission(recipient_id, replace(msg, ttl_hops=remaining))
        elif msg.kind is MessageKind.ACCIDENT_REPORT:
            if node.role is NodeRole.RSU_FIXED:
                self.corroborate(recipient_id, msg)
        elif msg.kind is MessageKind.PLATOON_CONTROL:
            self._handle_platoon_control(node, msg)

    def _handle_platoon_control(self, node: SimNode, msg: Message) -> None:
        command = Command(
            CommandKind(msg.payload.get("command", "SetSpeed")),
            {"speed_mps": msg.payload.get("speed_mps")},
        )
        if node.role is NodeRole.PLATOON_LEADER and node.platoon_id is not None:
            members = self.platoons[node.platoon_id]["members"]
            for member_id, sub_command in decompose_command(
                node.node_id, node.role, members, command
            ):
                forwarded = self.make_message(
                    node.node_id, MessageKind.PLATOON_CONTROL,
                    dict(msg.payload),
                )
                self._transmit(node.node_id, member_id, forwarded)
        elif node.role is NodeRole.PLATOON_MEMBER:
            node.applied_speeds.append(
                (self.tick, command.parameters.get("speed_mps"))
            )
            self._record(
                "APPLY_SPEED", node.node_id, origin=msg.origin,
                msg_id=msg.msg_id, kind=msg.kind.value,
                detail=f"speed={command.parameters.get('speed_mps')}",
            )

    # -- corroboration -----------------------------------------------------

    def corroborate(self, rsu_id: str, report: Message) -> str:
        """Fold one accident report into the unit's held-report registry.

        Returns "Promoted" once reports from ``corroboration_k`` distinct
        origins have arrived inside the hold window, else "Held".
        Promotion triggers one system-wide broadcast.  Reports are
        grouped by the event they describe, not by message identity.
        """
        event_key = report.payload.get("event_id", report.dedup_key)
        key = (rsu_id, event_key)
        if key in self._promoted:
            return "Promoted"
        state = self._held.get(key)
        if state is None:
            state = {"origins": set(), "first_tick": self.tick}
            self._held[key] = state
            self.queue.push(
                self.tick + self.config.hold_window_ticks,
                {"op": "expire_held", "key": key},
            )
        state["origins"].add(report.origin)
        if len(state["origins"]) >= self.config.corroboration_k:
            del self._held[key]
            self._promoted.add(key)
            self.counters["promotions"] += 1
            event_id = report.payload.get("event_id")
            self._record(
                "PROMOTE", rsu_id, origin=report.origin, msg_id=report.msg_id,
                kind=report.kind.value, detail=f"event_id={event_id}",
            )
            system_wide = self.make_message(
                rsu_id, MessageKind.EVENT_BROADCAST,
                {"event_id": event_id, "promoted_from": rsu_id},
            )
            self._broadcast_emission(rsu_id, system_wide)
            return "Promoted"
        self._record(
            "HOLD_REPORT", rsu_id, origin=report.origin, msg_id=report.msg_id,
            kind=report.kind.value,
            detail=f"origins={len(state['origins'])}",
        )
        return "Held"

    def _handle_expire_held(self, event: dict) -> None:
        key = event["key"]
        state = self._held.pop(key, None)
        if state is None:
            return
        self.counters["reports_expired"] += 1
        rsu_id, dedup_key = key
        self._record(
            "REPORT_EXPIRED", rsu_id,
            detail=f"origins={len(state['origins'])};key={dedup_key!r}",
        )

    # -- platoons ----------------------------------------------------------

    def form_platoon(self, leader_id: str, member_ids: Sequence[str]) -> str:
        for node_id in [leader_id, *member_ids]:
            if node_id not in self.nodes:
                raise AddressingError(f"unknown platoon node {node_id!r}")
            node = self.nodes[node_id]
            if node.role is NodeRole.RSU_FIXED:
                raise MembershipError(f"roadside unit {node_id!r} cannot platoon")
            if node.platoon_id is not None:
                raise MembershipError(
                    f"node {node_id!r} already belongs to platoon "
                    f"{node.platoon_id!r}"
                )
        if leader_id in member_ids:
            raise MembershipError("leader cannot be its own member")
        platoon_id = f"platoon-{self._platoon_counter}"
        self._platoon_counter += 1
        self.platoons[platoon_id] = {"leader": leader_id, "members": list(member_ids)}
        self.nodes[leader_id].role = NodeRole.PLATOON_LEADER
        self.nodes[leader_id].platoon_id = platoon_id
        for member_id in member_ids:
            self.nodes[member_id].role = NodeRole.PLATOON_MEMBER
            self.nodes[member_id].platoon_id = platoon_id
        self._record(
            "PLATOON_FORMED", leader_id,
            detail=f"platoon={platoon_id};members=" + "|".join(member_ids),
        )
        return platoon_id

    def join_platoon(self, node_id: str, platoon_id: str) -> None:
        if node_id not in self.nodes:
            raise AddressingError(f"unknown node {node_id!r}")
        if platoon_id not in self.platoons:
            raise MembershipError(f"unknown platoon {platoon_id!r}")
        node = self.nodes[node_id]
        if node.platoon_id is not None:
            raise MembershipError(
                f"node {node_id!r} already belongs to platoon {node.platoon_id!r}"
            )
        if node.role is NodeRole.RSU_FIXED:
            raise MembershipError(f"roadside unit {node_id!r} cannot platoon")
        self.platoons[platoon_id]["members"].append(node_id)
        node.platoon_id = platoon_id
        node.role = NodeRole.PLATOON_MEMBER
        self._record("PLATOON_JOIN", node_id, detail=f"platoon={platoon_id}")

    def leave_platoon(self, node_id: str) -> None:
        if node_id not in self.nodes:
            raise AddressingError(f"unknown node {node_id!r}")
        node = self.nodes[node_id]
        if node.platoon_id is None:
            raise MembershipError(f"node {node_id!r} is not in a platoon")
        platoon_id = node.platoon_id
        platoon = self.platoons[platoon_id]
        if platoon["leader"] == node_id:
            # The leader leaving disbands the platoon: members regain
            # direct communication immediately.
            for member_id in platoon["members"]:
                member = self.nodes[member_id]
                member.platoon_id = None
                member.role = NodeRole.VEHICLE_DYNAMIC
            del self.platoons[platoon_id]
            node.platoon_id = None
            node.role = NodeRole.VEHICLE_DYNAMIC
            self._record("PLATOON_DISBANDED", node_id, detail=f"platoon={platoon_id}")
            return
        platoon["members"].remove(node_id)
        node.platoon_id = None
        node.role = NodeRole.VEHICLE_DYNAMIC
        self._record("PLATOON_LEAVE", node_id, detail=f"platoon={platoon_id}")

    # -- emergency preemption ----------------------------------------------

    def request_right_of_way(
        self, vehicle_id: str, path: Sequence[str]
    ) -> PreemptionOutcome:
        """Ask the infrastructure to clear a signalled path.

        Only emergency-tactical vehicles are granted; every signal on
        the path turns green until the vehicle passes it, and roadside
        units along the path tell nearby platoons to slow down.  Denials
        are traced and audited, never silent.
        """
        if vehicle_id not in self.nodes:
            raise AddressingError(f"unknown vehicle {vehicle_id!r}")
        unknown = [s for s in path if s not in self.signals]
        if unknown:
            raise RoutingError(f"unknown signals on path: {unknown}")
        node = self.nodes[vehicle_id]
        reason = ""
        if node.role is not NodeRole.EMERGENCY_TACTICAL:
            reason = "requester_not_emergency"
        elif not self.config.preemption_enabled:
            reason = "preemption_disabled"
        if reason:
            self.counters["preemptions_denied"] += 1
            self._record(
                "PREEMPTION_DENIED", vehicle_id,
                detail=f"reason={reason};path=" + "|".join(path),
            )
            self.audit_log.append(
                RecordKind.PREEMPTION,
                logical_time=self.tick,
                intermediates={
                    "vehicle": vehicle_id, "path": list(path),
                    "granted": False, "reason": reason,
                },
                rulebase_version=0,
            )
            return PreemptionOutcome(False, vehicle_id, tuple(path), reason)

        plan_id = f"plan-{self._plan_counter}"
        self._plan_counter += 1
        self._plans[plan_id] = {
            "vehicle": vehicle_id,
            "signals": set(path),
            "restored": set(),
        }
        self.counters["preemptions_granted"] += 1
        for signal_id in path:
            signal = self.signals[signal_id]
            signal.override = "green"
            signal.overridden_by = plan_id
            self._record(
                "SIGNAL_OVERRIDE", signal.rsu_id,
                detail=f"signal={signal_id};state=green;plan={plan_id}",
            )
        self._slow_nearby_platoons(path)
        self._record(
            "PREEMPTION_GRANTED", vehicle_id,
            detail=f"plan={plan_id};path=" + "|".join(path),
        )
        self.audit_log.append(
            RecordKind.PREEMPTION,
            logical_time=self.tick,
            intermediates={
                "vehicle": vehicle_id, "path": list(path),
                "granted": True, "plan": plan_id,
            },
            rulebase_version=0,
        )
        return PreemptionOutcome(True, vehicle_id, tuple(path), plan_id=plan_id)

    def _slow_nearby_platoons(self, path: Sequence[str]) -> None:
        rsus = []
        for signal_id in path:
            rsu_id = self.signals[signal_id].rsu_id
            if rsu_id not in rsus:
                rsus.append(rsu_id)
        for rsu_id in rsus:
            rsu = self.nodes[rsu_id]
            for platoon_id, platoon in self.platoons.items():
                leader = self.nodes[platoon["leader"]]
                if _distance(rsu.position, leader.position) > self.channel.range_m:
                    continue
                msg = self.make_message(
                    rsu_id, MessageKind.PLATOON_CONTROL,
                    {
                        "command": "SetSpeed",
                        "speed_mps": self.config.slow_speed_mps,
                        "platoon": platoon_id,
                    },
                )
                self._transmit(rsu_id, leader.node_id, msg)

    def _restore_signal(self, signal: Signal, plan_id: str) -> None:
        signal.override = None
        signal.overridden_by = None
        plan = self._plans.get(plan_id)
        if plan is not None:
            plan["restored"].add(signal.signal_id)
        self._record(
            "SIGNAL_RESTORED", signal.rsu_id,
            detail=f"signal={signal.signal_id};plan={plan_id}",
        )

    # -- scripted route traversal -------------------------------------------

    def _travel_ticks(self, distance_m: float, speed_mps: float) -> int:
        if distance_m <= 0:
            return 0
        return max(1, math.ceil(distance_m / (speed_mps * TICK_SECONDS)))

    def _handle_depart(self, event: dict) -> None:
        route = self.routes[event["vehicle"]]
        self._depart_ticks[route.vehicle] = self.tick
        self._record("ROUTE_DEPART", route.vehicle, detail=f"length={route.length_m}")
        if route.stops:
            _, at = route.stops[0]
            self.queue.push(
                self.tick + self._travel_ticks(at, route.speed_mps),
                {"op": "arrive", "vehicle": route.vehicle, "stop": 0},
            )
        else:
            self.queue.push(
                self.tick + self._travel_ticks(route.length_m, route.speed_mps),
                {"op": "finish", "vehicle": route.vehicle},
            )

    def _handle_arrive(self, event: dict) -> None:
        route = self.routes[event["vehicle"]]
        index = event["stop"]
        signal_id, at = route.stops[index]
        signal = self.signals[signal_id]
        if not signal.is_green(self.tick):
            self._record(
                "WAIT_SIGNAL", route.vehicle,
                detail=f"signal={signal_id};until={signal.next_green_tick(self.tick)}",
            )
            self.queue.push(
                signal.next_green_tick(self.tick),
                {"op": "arrive", "vehicle": route.vehicle, "stop": index},
            )
            return
        self._record("PASS_SIGNAL", route.vehicle, detail=f"signal={signal_id}")
        if signal.override == "green" and signal.overridden_by is not None:
            plan = self._plans.get(signal.overridden_by)
            if plan is not None and plan["vehicle"] == route.vehicle:
                self._restore_signal(signal, signal.overridden_by)
        if index + 1 < len(route.stops):
            next_at = route.stops[index + 1][1]
            self.queue.push(
                self.tick + self._travel_ticks(next_at - at, route.speed_mps),
                {"op": "arrive", "vehicle": route.vehicle, "stop": index + 1},
            )
        else:
            self.queue.push(
                self.tick + self._travel_ticks(route.length_m - at, route.speed_mps),
                {"op": "finish", "vehicle": route.vehicle},
            )

    def _handle_finish(self, event: dict) -> None:
        vehicle = event["vehicle"]
        depart = self._depart_ticks.get(vehicle, 0)
        self.traversal_ticks[vehicle] = self.tick - depart
        self._record("ROUTE_FINISH", vehicle, detail=f"ticks={self.tick - depart}")
        # Restore anything this vehicle's plan still holds (signals it
        # was granted but never physically passed).
        for plan_id, plan in self._plans.items():
            if plan["vehicle"] != vehicle:
                continue
            for signal_id in sorted(plan["signals"] - plan["restored"]):
                signal = self.signals[signal_id]
                if signal.overridden_by == plan_id:
                    self._restore_signal(signal, plan_id)

    # -- attacks -------------------------------------------------------------

    def inject_attack(self, kind: str, params: Mapping[str, Any]) -> AttackHandle:
        """Register a scripted adversary; returns a handle for its findings."""
        params = dict(params)
        handle = AttackHandle(f"attack-{len(self.attacks)}", kind, params)
        if kind == "DosFlood":
            origin, target = params["origin"], params["target"]
            if origin not in self.nodes or target not in self.nodes:
                raise AddressingError("flood endpoints must be known nodes")
            start = int(params.get("start_tick", 0))
            duration = int(params.get("duration_ticks", 1))
            for tick in range(start, start + duration):
                self.queue.push(tick, {"op": "flood_tick", "attack": handle})
        elif kind == "FalseMessage":
            origin = params["origin"]
            if origin not in self.nodes:
                raise AddressingError(f"unknown origin {origin!r}")
            start = int(params.get("start_tick", 0))
            repeats = int(params.get("repeats", 2))
            for i in range(repeats):
                self.queue.push(start + i, {"op": "false_report", "attack": handle})
        elif kind == "Eavesdrop":
            observer = params["observer"]
            if observer not in self.nodes:
                raise AddressingError(f"unknown observer {observer!r}")
            self._eavesdroppers.append(observer)
        else:
            raise ConfigurationError(f"unknown attack kind {kind!r}")
        self.attacks.append(handle)
        self.audit_log.append(
            RecordKind.ATTACK_OBSERVATION,
            logical_time=self.tick,
            intermediates={"attack": kind, "params": params},
            rulebase_version=0,
        )
        self._record("ATTACK_INJECTED", params.get("origin", params.get("observer", "")),
                     detail=f"kind={kind}")
        return handle

    def _handle_flood_tick(self, event: dict) -> None:
        handle: AttackHandle = event["attack"]
        origin = handle.params["origin"]
        target = handle.params["target"]
        rate = int(handle.params.get("rate_per_tick", 100))
        for _ in range(rate):
            msg = self.make_message(origin, MessageKind.ADVISORY, {"flood": True})
            self._transmit(origin, target, msg)

    def _handle_false_report(self, event: dict) -> None:
        handle: AttackHandle = event["attack"]
        origin = handle.params["origin"]
        event_id = handle.params.get("event_id", f"fabricated-{handle.attack_id}")
        msg = self.make_message(
            origin, MessageKind.ACCIDENT_REPORT,
            {"event_id": event_id, "position": handle.params.get("position", [0, 0])},
        )
        self.broadcast_with_suppression(origin, msg)

    # -- scheduled operations --------------------------------------------------

    def _handle_schedule(self, op: dict) -> None:
        name = op["op"]
        if name == "broadcast":
            region = None
            if op.get("context_region") is not None:
                region = Region(*op["context_region"])
            msg = self.make_message(
                op["node"], op.get("kind", MessageKind.EVENT_BROADCAST),
                op.get("payload", {}) | (
                    {"event_id": op["event_id"]} if "event_id" in op else {}
                ),
                ttl_hops=op.get("ttl_hops"),
                context_region=region,
                papa=_papa_from(op.get("papa")),
            )
            self.broadcast_with_suppression(op["node"], msg)
        elif name == "send":
            msg = self.make_message(
                op["from"], op.get("kind", MessageKind.ADVISORY),
                op.get("payload", {}),
                papa=_papa_from(op.get("papa")),
            )
            self.send(op["from"], op["to"], msg)
        elif name == "report_accident":
            msg = self.make_message(
                op["node"], MessageKind.ACCIDENT_REPORT,
                {"event_id": op["event_id"],
                 "position": op.get("position", [0.0, 0.0])},
            )
            self.broadcast_with_suppression(op["node"], msg)
        elif name == "request_right_of_way":
            self.request_right_of_way(op["vehicle"], op["path"])
        elif name == "form_platoon":
            self.form_platoon(op["leader"], op["members"])
        elif name == "join_platoon":
            self.join_platoon(op["node"], op["platoon"])
        elif name == "leave_platoon":
            self.leave_platoon(op["node"])
        elif name == "platoon_speed":
            platoon = self.platoons[op["platoon"]]
            leader = platoon["leader"]
            msg = self.make_message(
                leader, MessageKind.PLATOON_CONTROL,
                {"command": "SetSpeed", "speed_mps": op["speed_mps"],
                 "platoon": op["platoon"]},
            )
            self._handle_platoon_control(self.nodes[leader], msg)
        else:
            raise ConfigurationError(f"unknown scheduled operation {name!r}")

    # -- main loop ----------------------------------------------------------------

    def step(self) -> int:
        """Process every event at the next tick; returns the new clock."""
        if len(self.queue) == 0:
            self.tick += 1
            return self.tick
        tick, events = self.queue.pop_tick()
        self.tick = tick
        for event in events:
            self._dispatch(event)
        # Events scheduled for this same tick while handling (possible
        # only via zero-latency channels) are processed before moving on.
        while self.queue.peek_tick() == self.tick:
            _, more = self.queue.pop_tick()
            for event in more:
                self._dispatch(event)
        return self.tick

    def _dispatch(self, event: dict) -> None:
        if "schedule" in event:
            self._handle_schedule(event["schedule"])
            return
        op = event["op"]
        if op == "deliver":
            self._handle_deliver(event)
        elif op == "arrive":
            self._handle_arrive(event)
        elif op == "depart":
            self._handle_depart(event)
        elif op == "finish":
            self._handle_finish(event)
        elif op == "expire_held":
            self._handle_expire_held(event)
        elif op == "flood_tick":
            self._handle_flood_tick(event)
        elif op == "false_report":
            self._handle_false_report(event)
        else:
            raise ConfigurationError(f"unknown event {op!r}")

    def run(self) -> dict:
        """Drive the queue dry (or to the horizon) and summarize."""
        while len(self.queue) and self.queue.peek_tick() <= self.config.max_ticks:
            self.step()
        log.debug("simulation drained at tick %d", self.tick)
        return self.summary()

    def summary(self) -> dict:
        unrestored = sum(
            1 for signal in self.signals.values() if signal.override is not None
        )
        processed_by_node = {
            node_id: sum(node.processed.values())
            for node_id, node in sorted(self.nodes.items())
        }
        return {
            "seed": self.seed,
            "final_tick": self.tick,
            "node_count": len(self.nodes),
            **{k: v for k, v in sorted(self.counters.items())},
            "drops": dict(sorted(self.drops.items())),
            "processed_by_node": processed_by_node,
            "traversal_ticks": dict(sorted(self.traversal_ticks.items())),
            "signals_unrestored": unrestored,
            "platoons": {
                pid: {"leader": p["leader"], "members": list(p["members"])}
                for pid, p in sorted(self.platoons.items())
            },
        }


def _papa_from(raw: Optional[Mapping[str, Any]]) -> Optional[PapaPolicy]:
    if raw is None:
        return None
    return PapaPolicy(
        privacy_consent=bool(raw.get("privacy_consent", True)),
        provenance=str(raw.get("provenance", "")),
        owner=str(raw.get("owner", "")),
        acl=tuple(raw.get("acl", ("any",))),
    )
