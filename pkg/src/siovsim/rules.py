"""Prioritized prohibition rules and the SEL ordering for outcomes.

A :class:`RuleBase` is an ordered set of laws (priority 1 is the most
binding).  :func:`evaluate` judges one outcome's flags against the
laws lexicographically: the highest-priority unexcused violation
decides.  Lower laws carry "except where" escapes — disobeying a
driver order is excused when obeying it would break a higher law, and
sacrificing the vehicle is excused when preserving it would.

:func:`admissible_actions` filters a candidate set down to the actions
that violate nothing; when every action violates something it falls
back to the least-severe violators so a decision always exists.

Rule bases are community-scoped and versioned; updates must advance
the version and are kept retrievable for replaying old decisions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence, TypeVar

from .errors import ConfigurationError, RuleValidationError, VersionError


class PredicateKind(str, Enum):
    """What an outcome must avoid (or, for the fallback, must optimize)."""

    NO_HUMAN_INJURY = "NoHumanInjury"
    NO_ANIMAL_INJURY = "NoAnimalInjury"
    OBEY_DRIVER_ORDER = "ObeyDriverOrder"
    SELF_PRESERVATION = "SelfPreservation"
    TRAFFIC_AND_PAPA_COMPLIANCE = "TrafficAndPapaCompliance"
    LEAST_HARM_FALLBACK = "LeastHarmFallback"


@dataclass(frozen=True)
class Law:
    priority: int  # 1 = most binding
    law_id: str
    predicate_kind: PredicateKind
    description: str = ""

    def __post_init__(self) -> None:
        if self.priority < 1:
            raise RuleValidationError(
                f"law {self.law_id!r}: priority must be >= 1, got {self.priority}"
            )


@dataclass(frozen=True)
class RuleBase:
    """A versioned, community-scoped set of laws, sorted by priority."""

    version: int
    laws: tuple[Law, ...]
    community_id: str = "default"

    def __post_init__(self) -> None:
        laws = tuple(sorted(self.laws, key=lambda law: law.priority))
        object.__setattr__(self, "laws", laws)
        priorities = [law.priority for law in laws]
        if len(set(priorities)) != len(priorities):
            raise RuleValidationError("law priorities must be unique")
        if priorities and priorities != list(range(1, len(priorities) + 1)):
            raise RuleValidationError(
                f"law priorities must be contiguous from 1, got {priorities}"
            )
        ids = [law.law_id for law in laws]
        if len(set(ids)) != len(ids):
            raise RuleValidationError("law ids must be unique")
        if self.version < 1:
            raise RuleValidationError(f"version must be >= 1, got {self.version}")

    def law_at(self, priority: int) -> Law:
        return self.laws[priority - 1]


def default_rulebase(community_id: str = "default") -> RuleBase:
    """The baseline six-law set every smart vehicle ships with."""
    return RuleBase(
        version=1,
        community_id=community_id,
        laws=(
            Law(1, "no-human-injury", PredicateKind.NO_HUMAN_INJURY,
                "Never injure a human being, or allow one to come to harm "
                "through inaction."),
            Law(2, "no-animal-injury", PredicateKind.NO_ANIMAL_INJURY,
                "Never injure a living animal, except where avoiding it "
                "conflicts with a higher law."),
            Law(3, "obey-driver", PredicateKind.OBEY_DRIVER_ORDER,
                "Follow the human driver's orders, except where obeying "
                "conflicts with a higher law."),
            Law(4, "self-preservation", PredicateKind.SELF_PRESERVATION,
                "Protect the vehicle's own existence, except where doing so "
                "conflicts with a higher law."),
            Law(5, "traffic-papa-compliance",
                PredicateKind.TRAFFIC_AND_PAPA_COMPLIANCE,
                "Obey traffic regulations and the privacy/accuracy/property/"
                "accessibility information norms."),
            Law(6, "least-harm", PredicateKind.LEAST_HARM_FALLBACK,
                "When harm to humans is unavoidable, execute the trajectory "
                "with the least harmful outcome."),
        ),
    )


@dataclass(frozen=True)
class OutcomeFlags:
    """Observable properties of one candidate outcome.

    The two ``*_violates`` fields carry the priority of the law that
    *complying* would break, when known; they power the "except where"
    escapes (e.g. an order contradiction is excused when obeying the
    order would itself violate a higher law).
    """

    injures_human: bool = False
    injures_animal: bool = False
    contradicts_driver_order: bool = False
    destroys_self: bool = False
    violates_traffic_or_papa: bool = False
    order_obedience_violates: Optional[int] = None
    self_protection_violates: Optional[int] = None


class VerdictStatus(str, Enum):
    PERMITTED = "Permitted"
    FORBIDDEN = "Forbidden"


@dataclass(frozen=True)
class Verdict:
    status: VerdictStatus
    rulebase_version: int
    violated_law: Optional[str] = None
    violated_priority: Optional[int] = None

    def __post_init__(self) -> None:
        forbidden = self.status is VerdictStatus.FORBIDDEN
        if forbidden != (self.violated_law is not None):
            raise RuleValidationError(
                "verdict must name a violated law iff it is Forbidden"
            )

    @property
    def permitted(self) -> bool:
        return self.status is VerdictStatus.PERMITTED


def _law_triggered(law: Law, outcome: OutcomeFlags) -> bool:
    kind = law.predicate_kind
    if kind is PredicateKind.NO_HUMAN_INJURY:
        return outcome.injures_human
    if kind is PredicateKind.NO_ANIMAL_INJURY:
        return outcome.injures_animal
    if kind is PredicateKind.OBEY_DRIVER_ORDER:
        return outcome.contradicts_driver_order
    if kind is PredicateKind.SELF_PRESERVATION:
        return outcome.destroys_self
    if kind is PredicateKind.TRAFFIC_AND_PAPA_COMPLIANCE:
        return outcome.violates_traffic_or_papa
    # The fallback law prescribes a selection strategy; it cannot be
    # violated by a single outcome in isolation.
    return False


def _violation_excused(law: Law, outcome: OutcomeFlags) -> bool:
    if law.predicate_kind is PredicateKind.OBEY_DRIVER_ORDER:
        p = outcome.order_obedience_violates
    elif law.predicate_kind is PredicateKind.SELF_PRESERVATION:
        p = outcome.self_protection_violates
    else:
        return False
    return p is not None and p < law.priority


def evaluate(outcome: OutcomeFlags, rulebase: RuleBase) -> Verdict:
    """Judge one outcome: first unexcused violation, walking priority order."""
    if not rulebase.laws:
        raise ConfigurationError("cannot evaluate against an empty rule base")
    for law in rulebase.laws:
        if _law_triggered(law, outcome) and not _violation_excused(law, outcome):
            return Verdict(
                status=VerdictStatus.FORBIDDEN,
                rulebase_version=rulebase.version,
                violated_law=law.law_id,
                violated_priority=law.priority,
            )
    return Verdict(status=VerdictStatus.PERMITTED, rulebase_version=rulebase.version)


C = TypeVar("C")


def admissible_actions(
    candidates: Sequence[tuple[C, OutcomeFlags]], rulebase: RuleBase
) -> list[C]:
    """Filter candidates by the laws; never returns an empty set.

    Clean candidates (no violation) win outright.  If every candidate
    violates some law, the least-severe violators survive: those whose
    most binding violated priority is numerically largest.  The caller
    breaks remaining ties by consequence (least total harm).
    """
    if not candidates:
        raise ConfigurationError("candidate list must be non-empty")
    judged = [(cand, evaluate(flags, rulebase)) for cand, flags in candidates]
    clean = [cand for cand, verdict in judged if verdict.permitted]
    if clean:
        return clean
    least_severe = max(verdict.violated_priority for _, verdict in judged)
    return [
        cand for cand, verdict in judged
        if verdict.violated_priority == least_severe
    ]


@dataclass(frozen=True, order=True)
class SelScore:
    """Safety/ethics/legality score, compared lexicographically.

    Lower is better on every component: probability of endangering a
    human, then probability of endangering the vehicle, then distance
    remaining to the mission goal.
    """

    p_human_danger: float
    p_sv_danger: float
    goal_distance: float

    def __post_init__(self) -> None:
        for name in ("p_human_danger", "p_sv_danger"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ConfigurationError(f"{name} must lie in [0, 1], got {p!r}")
        if self.goal_distance < 0:
            raise ConfigurationError(
                f"goal_distance must be non-negative, got {self.goal_distance!r}"
            )


def sel_compare(a: SelScore, b: SelScore) -> int:
    """Lexicographic ordering: -1 if a is safer/better, 0 if equal, 1 else."""
    ka = (a.p_human_danger, a.p_sv_danger, a.goal_distance)
    kb = (b.p_human_danger, b.p_sv_danger, b.goal_distance)
    return -1 if ka < kb else (1 if ka > kb else 0)


def update_rulebase(
    base: RuleBase, new_laws: Sequence[Law], new_version: int
) -> RuleBase:
    """Produce the next revision of a community's rule base.

    Versions move strictly forward; the new law set must satisfy the
    same structural invariants as any rule base.  The caller is
    responsible for recording the update in its audit log and for
    keeping the old revision retrievable (see :class:`RuleBaseHistory`).
    """
    if new_version <= base.version:
        raise VersionError(
            f"rule base version must increase: {base.version} -> {new_version}"
        )
    return RuleBase(
        version=new_version, laws=tuple(new_laws), community_id=base.community_id
    )


class RuleBaseHistory:
    """All revisions of one community's rule base, for decision replay.

    Single-writer: publish new revisions from one place; readers may
    share the frozen :class:`RuleBase` values freely.
    """

    def __init__(self, initial: RuleBase):
        self._revisions: dict[int, RuleBase] = {initial.version: initial}
        self._latest = initial

    @property
    def latest(self) -> RuleBase:
        return self._latest

    def publish(self, new_laws: Sequence[Law], new_version: int) -> RuleBase:
        updated = update_rulebase(self._latest, new_laws, new_version)
        self._revisions[updated.version] = updated
        self._latest = updated
        return updated

    def get(self, version: int) -> RuleBase:
        try:
            return self._revisions[version]
        except KeyError:
            raise VersionError(f"no rule base revision {version}") from None

    def versions(self) -> list[int]:
        return sorted(self._revisions)
