"""Road-world entities shared by the decision engine and the network sim."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import DomainError
from .ethics import (
    MAX_SAFETY_RATING,
    PEDESTRIAN_SAFETY_RATING,
    Occupant,
    total_ethical_value,
    validate_safety_rating,
)


class EntityKind(str, Enum):
    SMART_VEHICLE = "SmartVehicle"
    HUMAN_DRIVEN_VEHICLE = "HumanDrivenVehicle"
    TRUCK = "Truck"
    MOTORCYCLE = "Motorcycle"
    BICYCLE = "Bicycle"
    PEDESTRIAN = "Pedestrian"
    ANIMAL = "Animal"
    RSU = "Rsu"


#: Kinds that move under their own power and therefore need a mass.
MOBILE_KINDS = frozenset(k for k in EntityKind if k is not EntityKind.RSU)

#: Kinds that take part in vehicle-to-vehicle networking.
NETWORKED_KINDS = frozenset({
    EntityKind.SMART_VEHICLE,
    EntityKind.HUMAN_DRIVEN_VEHICLE,
    EntityKind.TRUCK,
    EntityKind.MOTORCYCLE,
    EntityKind.RSU,
})


class NodeRole(str, Enum):
    """Behavioural role a networked node plays in the hierarchy."""

    RSU_FIXED = "RsuFixed"
    VEHICLE_DYNAMIC = "VehicleDynamic"
    PLATOON_LEADER = "PlatoonLeader"
    PLATOON_MEMBER = "PlatoonMember"
    EMERGENCY_TACTICAL = "EmergencyTactical"


#: Command-hierarchy level per role; higher levels direct lower ones.
#: Emergency vehicles rank at least as high as ordinary traffic so they
#: can interact with the fixed infrastructure tier directly.
DEFAULT_HIERARCHY_LEVEL = {
    NodeRole.VEHICLE_DYNAMIC: 1,
    NodeRole.PLATOON_MEMBER: 1,
    NodeRole.PLATOON_LEADER: 2,
    NodeRole.RSU_FIXED: 3,
    NodeRole.EMERGENCY_TACTICAL: 3,
}

_DEFAULT_ROLE_BY_KIND = {
    EntityKind.RSU: NodeRole.RSU_FIXED,
}

#: Default carrier protection per kind where one is well established.
DEFAULT_SAFETY_RATING_BY_KIND = {
    EntityKind.PEDESTRIAN: PEDESTRIAN_SAFETY_RATING,
    EntityKind.ANIMAL: PEDESTRIAN_SAFETY_RATING,
    EntityKind.RSU: MAX_SAFETY_RATING,
}


@dataclass(frozen=True)
class EntityState:
    """One object in the road world at a point in logical time."""

    entity_id: str
    kind: EntityKind
    position: tuple[float, float] = (0.0, 0.0)
    speed_mps: float = 0.0
    heading_deg: float = 0.0
    mass_kg: float = 0.0
    braking_distance_m: float = 1.0
    safety_rating: float = 0.0
    occupants: tuple[Occupant, ...] = ()
    role: NodeRole | None = None
    access_role: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", EntityKind(self.kind))
        object.__setattr__(self, "position", tuple(self.position))
        occupants = tuple(
            occ if isinstance(occ, Occupant) else Occupant(float(occ))
            for occ in self.occupants
        )
        object.__setattr__(self, "occupants", occupants)

        if self.safety_rating == 0.0:
            rating = DEFAULT_SAFETY_RATING_BY_KIND.get(self.kind)
            if rating is None:
                raise DomainError(
                    f"entity {self.entity_id!r} ({self.kind.value}) needs an "
                    "explicit safety rating"
                )
            object.__setattr__(self, "safety_rating", rating)
        validate_safety_rating(self.safety_rating)
        if (
            self.kind is EntityKind.PEDESTRIAN
            and self.safety_rating != PEDESTRIAN_SAFETY_RATING
        ):
            raise DomainError(
                f"entity {self.entity_id!r}: pedestrians carry the fixed "
                f"unshelled rating {PEDESTRIAN_SAFETY_RATING}, "
                f"got {self.safety_rating!r}"
            )

        if self.kind in MOBILE_KINDS and self.mass_kg <= 0:
            raise DomainError(
                f"entity {self.entity_id!r} ({self.kind.value}) must have "
                f"positive mass, got {self.mass_kg!r}"
            )
        if self.kind is EntityKind.RSU and self.speed_mps != 0.0:
            raise DomainError(f"entity {self.entity_id!r}: roadside units are fixed")
        if self.speed_mps < 0:
            raise DomainError(f"entity {self.entity_id!r}: speed must be >= 0")
        if self.braking_distance_m <= 0:
            raise DomainError(
                f"entity {self.entity_id!r}: braking distance must be positive"
            )
        if self.kind is EntityKind.ANIMAL and self.occupants:
            raise DomainError(
                f"entity {self.entity_id!r}: animals carry no occupants"
            )
        if self.kind is EntityKind.PEDESTRIAN and not self.occupants:
            raise DomainError(
                f"entity {self.entity_id!r}: a pedestrian entity is the "
                "person; it needs at least one occupant (the walker)"
            )

        if self.role is None:
            object.__setattr__(
                self,
                "role",
                _DEFAULT_ROLE_BY_KIND.get(self.kind, NodeRole.VEHICLE_DYNAMIC),
            )
        else:
            object.__setattr__(self, "role", NodeRole(self.role))
        if self.kind is EntityKind.RSU and self.role is not NodeRole.RSU_FIXED:
            raise DomainError(
                f"entity {self.entity_id!r}: roadside units never change role"
            )
        if not self.access_role:
            object.__setattr__(self, "access_role", _default_access_role(self))

    @property
    def tev_u(self) -> float:
        """Total ethical value aboard this entity (animals carry none)."""
        if self.kind is EntityKind.ANIMAL:
            return 0.0
        return total_ethical_value(self.occupants, self.safety_rating)

    @property
    def hierarchy_level(self) -> int:
        return DEFAULT_HIERARCHY_LEVEL[self.role]

    @property
    def is_networked(self) -> bool:
        return self.kind in NETWORKED_KINDS


def _default_access_role(entity: EntityState) -> str:
    if entity.kind is EntityKind.RSU:
        return "infrastructure"
    if entity.role is NodeRole.EMERGENCY_TACTICAL:
        return "emergency"
    return "vehicle"
