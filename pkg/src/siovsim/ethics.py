"""Utilitarian crash calculus for smart-vehicle collision choices.

The model values people by life stage rather than by identity: each
occupant maps to an integer category (1..5, higher = more protected)
derived from age.  A carrier's protection divides that value:

* ``personal_ethical_value``  PEV = category / safety_rating   [u]
* ``total_ethical_value``     TEV = sum of occupant PEVs        [u]
* ``crash_force``             F   = m * v^2 / (2 * d)           [N]
* ``utilitarian_force``       UF  = F * TEV                     [uN]
* ``total_utilitarian_force`` TUF = sum of |UF| over everyone
  involved in one candidate outcome                             [uN]

``select_min_tuf`` then picks the candidate action with the least total
utilitarian force.  All functions here are pure; all value types are
immutable, so instances can be shared freely across threads.

Unit conventions: ages in years, mass in kg, speed in m/s, distances in
metres.  Suffixes ``_u``/``_n``/``_un`` mark ethical-value units,
newtons, and ethical-value-weighted newtons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence

from .errors import DomainError


class LifeStageCategory(IntEnum):
    """Life-stage scale; a higher number marks a more protected stage."""

    MATURE_ADULTHOOD = 1
    ADULTHOOD = 2
    ADOLESCENCE_AND_EARLY_ADULTHOOD = 3
    CHILDHOOD = 4
    INFANCY = 5

    @property
    def label(self) -> str:
        return _CATEGORY_LABELS[self]


_CATEGORY_LABELS = {
    LifeStageCategory.MATURE_ADULTHOOD: "Mature Adulthood",
    LifeStageCategory.ADULTHOOD: "Adulthood",
    LifeStageCategory.ADOLESCENCE_AND_EARLY_ADULTHOOD: "Adolescence & Early Adulthood",
    LifeStageCategory.CHILDHOOD: "Childhood",
    LifeStageCategory.INFANCY: "Infancy",
}

#: Default age boundaries, as (exclusive upper age, category) pairs.
#: An age belongs to the first segment whose upper bound exceeds it.
DEFAULT_AGE_BOUNDARIES: tuple[tuple[float, LifeStageCategory], ...] = (
    (2.0, LifeStageCategory.INFANCY),
    (13.0, LifeStageCategory.CHILDHOOD),
    (26.0, LifeStageCategory.ADOLESCENCE_AND_EARLY_ADULTHOOD),
    (61.0, LifeStageCategory.ADULTHOOD),
    (math.inf, LifeStageCategory.MATURE_ADULTHOOD),
)

#: Safety rating assigned to unshelled road users (pedestrians, and any
#: personal conveyance such as strollers, wheelchairs, or skateboards).
PEDESTRIAN_SAFETY_RATING = 0.1

#: Highest safety rating on the scale (the safest enclosed vehicle).
MAX_SAFETY_RATING = 5.0


def life_stage_category(
    age_years: float,
    boundaries: Sequence[tuple[float, LifeStageCategory]] = DEFAULT_AGE_BOUNDARIES,
) -> LifeStageCategory:
    """Map an age in years onto its life-stage category.

    ``boundaries`` may be overridden by deployments that draw the five
    segments differently; it must be sorted by upper bound and end with
    an unbounded segment.
    """
    if age_years < 0 or math.isnan(age_years):
        raise DomainError(f"age must be non-negative, got {age_years!r}")
    for upper, category in boundaries:
        if age_years < upper:
            return category
    raise DomainError(f"age {age_years!r} not covered by boundaries")


def daly(years_of_life_lost: float, years_lived_with_disability: float) -> float:
    """Disability-adjusted life years: YLL + YLD.

    The categorical scale above is calibrated against this burden
    measure; the raw sum is exposed for tooling that works with actual
    health statistics.
    """
    if years_of_life_lost < 0 or years_lived_with_disability < 0:
        raise DomainError("DALY components must be non-negative")
    return years_of_life_lost + years_lived_with_disability


def validate_safety_rating(value: float) -> float:
    """Check a carrier protection rating, 0 < rating <= 5; returns it."""
    if not (0.0 < value <= MAX_SAFETY_RATING):
        raise DomainError(
            f"safety rating must lie in (0, {MAX_SAFETY_RATING}], got {value!r}"
        )
    return value


@dataclass(frozen=True)
class Occupant:
    """One person aboard a carrier (a pedestrian carries themself)."""

    age_years: float

    def __post_init__(self) -> None:
        if self.age_years < 0:
            raise DomainError(f"age must be non-negative, got {self.age_years!r}")

    @property
    def category(self) -> LifeStageCategory:
        return life_stage_category(self.age_years)


def personal_ethical_value(
    category: LifeStageCategory | int, safety_rating: float
) -> float:
    """PEV in u: life-stage category divided by the carrier's rating.

    An infant in the safest vehicle is the unit: 5 / 5.0 = 1 u.  The
    same infant walking (rating 0.1) is worth 50 u; exposure dominates.
    """
    validate_safety_rating(safety_rating)
    category = LifeStageCategory(category)
    return category.value / safety_rating


def total_ethical_value(
    occupants: Iterable[Occupant | float], safety_rating: float
) -> float:
    """TEV in u: the sum of PEVs of everyone aboard one carrier.

    ``occupants`` may hold :class:`Occupant` values or bare ages.
    ``math.fsum`` keeps the sum exactly rounded, so the result does not
    depend on occupant order.
    """
    validate_safety_rating(safety_rating)
    pevs = []
    for occ in occupants:
        if not isinstance(occ, Occupant):
            occ = Occupant(float(occ))
        pevs.append(personal_ethical_value(occ.category, safety_rating))
    return math.fsum(pevs)


def crash_force(mass_kg: float, speed_mps: float, braking_distance_m: float) -> float:
    """Mean impact force in N for stopping over a braking distance.

    Kinetic energy m*v^2/2 spread over distance d gives F = m*v^2/(2*d).
    A 1000 kg car at 10 m/s stopping within 1 m yields 50 kN; the same
    car given 100 m brakes at a gentle 500 N.
    """
    if mass_kg <= 0:
        raise DomainError(f"mass must be positive, got {mass_kg!r}")
    if speed_mps < 0:
        raise DomainError(f"speed must be non-negative, got {speed_mps!r}")
    if braking_distance_m <= 0:
        raise DomainError(
            f"braking distance must be positive, got {braking_distance_m!r}"
        )
    return mass_kg * speed_mps * speed_mps / (2.0 * braking_distance_m)


def utilitarian_force(crash_force_n: float, tev_u: float) -> float:
    """UF in uN: crash force weighted by the ethical value it acts on."""
    if crash_force_n < 0:
        raise DomainError(f"crash force must be non-negative, got {crash_force_n!r}")
    if tev_u < 0:
        raise DomainError(f"TEV must be non-negative, got {tev_u!r}")
    return crash_force_n * tev_u


@dataclass(frozen=True)
class Participant:
    """One carrier involved in a candidate outcome.

    ``tev_u`` is the total ethical value aboard; ``crash_force_n`` the
    force this outcome applies to it.
    """

    entity_id: str
    tev_u: float
    crash_force_n: float

    def __post_init__(self) -> None:
        if self.tev_u < 0:
            raise DomainError(f"TEV must be non-negative, got {self.tev_u!r}")
        if self.crash_force_n < 0:
            raise DomainError(
                f"crash force must be non-negative, got {self.crash_force_n!r}"
            )

    @property
    def uf_un(self) -> float:
        return utilitarian_force(self.crash_force_n, self.tev_u)


@dataclass(frozen=True)
class CandidateAction:
    """One avoidance option and everyone it would involve."""

    action_id: str
    participants: tuple[Participant, ...]
    description: str = ""
    self_damage_only: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "participants", tuple(self.participants))


def total_utilitarian_force(action: CandidateAction) -> float:
    """TUF in uN: sum of |UF| over every participant of the action.

    Magnitudes are added (never cancelled), so opposing forces still
    count as harm.  Exactly-rounded summation keeps the result
    independent of participant order.
    """
    return math.fsum(abs(p.uf_un) for p in action.participants)


def select_min_tuf(
    candidates: Sequence[CandidateAction],
) -> tuple[CandidateAction, list[tuple[str, float]]]:
    """Pick the candidate with the least total utilitarian force.

    Returns the chosen action and a table of (action_id, TUF) for every
    candidate, in input order, for the audit trail.  Ties on TUF prefer
    an action that damages only the deciding vehicle; remaining ties go
    to the lowest action id, so the choice is total and deterministic.
    """
    if not candidates:
        raise DomainError("cannot select from an empty candidate list")
    table = [(c.action_id, total_utilitarian_force(c)) for c in candidates]
    chosen = min(
        zip(candidates, table),
        key=lambda pair: (pair[1][1], not pair[0].self_damage_only, pair[0].action_id),
    )[0]
    return chosen, table
