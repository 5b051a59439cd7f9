"""Longitudinal ego driver model: cruise control plus conflict braking."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum


class Profile(str, Enum):
    CAUTIOUS = "Cautious"
    NORMAL = "Normal"
    AGGRESSIVE = "Aggressive"


# seconds of arrival-time separation below which the ego brakes
HEADWAYS = {
    Profile.CAUTIOUS: 3.0,
    Profile.NORMAL: 2.0,
    Profile.AGGRESSIVE: 1.2,
}


@dataclass(frozen=True)
class EgoParams:
    v_target: float = 8.0
    v_max: float = 15.0
    k_cruise: float = 1.0
    a_max: float = 3.0
    b_max: float = 7.0
    # speed floor used when predicting arrival times
    v_predict_min: float = 0.1


@dataclass(frozen=True)
class EgoState:
    speed: float
    path_s: float
    yielding: frozenset = field(default_factory=frozenset)


@dataclass(frozen=True)
class Percept:
    """What the ego knows about one actor whose route conflicts with its own.

    ``ego_to_conflict`` and ``actor_to_conflict`` are signed remaining arc
    lengths to the shared conflict point; ``clearance`` is the sum of both
    disc radii.
    """

    actor_id: str
    visible: bool
    ego_to_conflict: float
    actor_to_conflict: float
    actor_speed: float
    clearance: float

    @property
    def actor_cleared(self) -> bool:
        return self.actor_to_conflict < -self.clearance

    @property
    def ego_cleared(self) -> bool:
        return self.ego_to_conflict < -self.clearance

    @property
    def actor_in_zone(self) -> bool:
        return abs(self.actor_to_conflict) <= self.clearance


def time_to_conflict(distance: float, speed: float, v_min: float) -> float:
    if distance <= 0.0:
        return 0.0
    if speed < v_min:
        return math.inf
    return distance / speed


def conflicting_actors(state: EgoState, percepts, profile: Profile,
                       params: EgoParams = EgoParams()) -> frozenset:
    """Ids of actors the ego should currently yield to.

    A visible actor conflicts when both still have to pass the conflict point
    and their predicted arrivals differ by less than the profile headway, or
    when it stands inside the conflict zone. Once yielding, the ego keeps
    yielding to an actor until that actor has cleared the zone.
    """
    headway = HEADWAYS[Profile(profile)]
    out = set()
    for p in percepts:
        if p.actor_cleared or p.ego_cleared:
            continue
        if p.actor_id in state.yielding:
            out.add(p.actor_id)
            continue
        if not p.visible:
            continue
        if p.actor_in_zone:
            out.add(p.actor_id)
            continue
        t_ego = time_to_conflict(p.ego_to_conflict, state.speed, params.v_predict_min)
        t_actor = time_to_conflict(p.actor_to_conflict, p.actor_speed, params.v_predict_min)
        if math.isinf(t_ego) or math.isinf(t_actor):
            continue
        if abs(t_ego - t_actor) < headway:
            out.add(p.actor_id)
    return frozenset(out)


def ego_behavior_step(state: EgoState, percepts, profile: Profile,
                      params: EgoParams = EgoParams()) -> float:
    """Acceleration command in m/s^2, clamped to [-b_max, a_max]."""
    if conflicting_actors(state, percepts, profile, params):
        return -params.b_max
    command = params.k_cruise * (params.v_target - state.speed)
    return min(max(command, -params.b_max), params.a_max)
