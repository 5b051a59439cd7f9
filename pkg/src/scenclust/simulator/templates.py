"""The two logical intersection scenarios.

All geometry, speeds and parameter ranges here are invented: right-hand
traffic, 3.5 m lanes, intersection centred at the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

from ..scenario import ParameterRange, ScenarioSpace, TemplateId
from .behavior import EgoParams, Profile
from .geometry import Polyline, Rectangle, arc_points, polyline_crossings


class ActorId(str, Enum):
    EGO = "Ego"
    PEDESTRIAN = "Pedestrian"
    CAR_C = "CarC"
    TRUCK = "Truck"


VEHICLE_RADIUS = 1.0
TRUCK_RADIUS = 1.8
PEDESTRIAN_RADIUS = 0.3

LANE = 1.75


@dataclass(frozen=True)
class ActorSpec:
    actor_id: ActorId
    route: Polyline
    radius: float
    max_speed: float
    # worst-case acceleration assumed by WTTC
    a_max: float
    body_length: float
    body_width: float

    def body(self, position, heading) -> Rectangle:
        return Rectangle(float(position[0]), float(position[1]),
                         self.body_length, self.body_width, float(heading))


@dataclass(frozen=True)
class ActorPlan:
    initial_s: float = 0.0
    speed: float = 0.0
    start_time: float = 0.0


@dataclass(frozen=True)
class SyncPlan:
    """Car C waits, starts at ``start_time`` with ``nominal_speed`` and rescales
    its speed once the ego has driven ``trigger_distance``, aiming to be at the
    conflict point when the ego is at ``ego_sync_s``."""

    actor_id: ActorId
    ego_sync_s: float
    start_time: float
    trigger_distance: float
    nominal_speed: float = 8.0
    v_min: float = 4.0
    v_max: float = 15.0


@dataclass(frozen=True)
class ScenarioTemplate:
    template_id: TemplateId
    actors: tuple
    space: ScenarioSpace
    planner: Callable
    occluders: tuple = ()
    conflicting: tuple = ()
    primary_pair: tuple = (ActorId.EGO, ActorId.PEDESTRIAN)
    stop_on_collision: bool = False
    profile: Profile = Profile.NORMAL
    ego_params: EgoParams = field(default_factory=EgoParams)
    dt: float = 0.05
    timeout: float = 60.0

    def actor(self, actor_id) -> ActorSpec:
        actor_id = ActorId(actor_id)
        for spec in self.actors:
            if spec.actor_id == actor_id:
                return spec
        raise KeyError(f"template {self.template_id.value} has no actor {actor_id.value}")

    @property
    def actor_ids(self) -> list[ActorId]:
        return [a.actor_id for a in self.actors]

    def conflict_point(self, a, b) -> tuple[np.ndarray, float, float]:
        """(point, s_a, s_b) where the routes of ``a`` and ``b`` cross.

        Raises ValueError unless the routes cross exactly once.
        """
        hits = polyline_crossings(self.actor(a).route, self.actor(b).route)
        if len(hits) != 1:
            raise ValueError(
                f"routes of {ActorId(a).value} and {ActorId(b).value} cross "
                f"{len(hits)} times; a single conflict point is required")
        return hits[0]

    def has_conflict(self, a, b) -> bool:
        return len(polyline_crossings(self.actor(a).route, self.actor(b).route)) == 1

    def plan(self, values) -> tuple[dict, Optional[SyncPlan]]:
        return self.planner(np.asarray(values, dtype=float))

    def with_profile(self, profile) -> "ScenarioTemplate":
        return replace(self, profile=Profile(profile))

    def with_space(self, space: ScenarioSpace) -> "ScenarioTemplate":
        if space.dim != self.space.dim:
            raise ValueError(f"{self.template_id.value} takes {self.space.dim} parameters, got {space.dim}")
        return replace(self, space=space)


# --- Scenario 1: X-intersection, ego turns right, pedestrian crosses its exit road

S1_APPROACH = 60.0
S1_CORNER_R = 7.0
S1_CROSSWALK_X = 14.0


def _s1_ego_route() -> Polyline:
    turn_start = (LANE, -(LANE + S1_CORNER_R))
    center = (LANE + S1_CORNER_R, -(LANE + S1_CORNER_R))
    arc = arc_points(center, S1_CORNER_R, math.pi, math.pi / 2)
    pts = np.vstack([[[LANE, turn_start[1] - S1_APPROACH]], arc, [[60.0, -LANE]]])
    return Polyline(pts)


def scenario1_space() -> ScenarioSpace:
    return ScenarioSpace(TemplateId.SCENARIO1, (
        ParameterRange("ego_start_s", 0.0, 40.0, "m"),
        ParameterRange("pedestrian_wait", 0.0, 10.0, "s"),
        ParameterRange("car_c_speed", 3.0, 12.0, "m/s"),
    ))


def _plan_scenario1(values):
    ego_start, ped_wait, c_speed = values
    return {
        ActorId.EGO: ActorPlan(initial_s=float(ego_start)),
        ActorId.PEDESTRIAN: ActorPlan(speed=1.4, start_time=float(ped_wait)),
        ActorId.CAR_C: ActorPlan(speed=float(c_speed)),
        ActorId.TRUCK: ActorPlan(speed=1.5),
    }, None


def scenario1_template() -> ScenarioTemplate:
    """Right turn with a pedestrian hidden behind westbound truck and car C."""
    actors = (
        ActorSpec(ActorId.EGO, _s1_ego_route(), VEHICLE_RADIUS, 15.0, 7.0, 4.5, 1.8),
        ActorSpec(ActorId.PEDESTRIAN, Polyline([[S1_CROSSWALK_X, 5.5], [S1_CROSSWALK_X, -6.5]]),
                  PEDESTRIAN_RADIUS, 2.0, 1.5, 0.5, 0.5),
        ActorSpec(ActorId.CAR_C, Polyline([[40.0, LANE], [-10.0, LANE]]),
                  VEHICLE_RADIUS, 15.0, 7.0, 4.5, 1.8),
        ActorSpec(ActorId.TRUCK, Polyline([[26.0, LANE], [-10.0, LANE]]),
                  TRUCK_RADIUS, 10.0, 7.0, 16.0, 2.5),
    )
    return ScenarioTemplate(
        template_id=TemplateId.SCENARIO1,
        actors=actors,
        space=scenario1_space(),
        planner=_plan_scenario1,
        occluders=(ActorId.TRUCK, ActorId.CAR_C),
        conflicting=(ActorId.PEDESTRIAN,),
        primary_pair=(ActorId.EGO, ActorId.PEDESTRIAN),
        stop_on_collision=False,
    )


# --- Scenario 2: T-intersection (stem to the south); the ego, coming from the
# east, turns left into the stem across car C's eastbound lane

S2_CORNER_R = 5.25
S2_EGO_APPROACH = 8.5


def _s2_ego_route() -> Polyline:
    half = 2 * LANE
    center = (half, -half)
    arc = arc_points(center, S2_CORNER_R, math.pi / 2, math.pi, n=32)
    pts = np.vstack([[[half + S2_EGO_APPROACH, LANE]], arc, [[-LANE, -40.0]]])
    return Polyline(pts)


def scenario2_space() -> ScenarioSpace:
    return ScenarioSpace(TemplateId.SCENARIO2, (
        ParameterRange("sync_s", 5.0, 25.0, "m"),
        ParameterRange("car_c_start_time", 0.0, 6.0, "s"),
        ParameterRange("trigger_distance", 0.0, 30.0, "m"),
    ))


def _plan_scenario2(values):
    sync_s, start_time, trigger = values
    plans = {
        ActorId.EGO: ActorPlan(initial_s=0.0),
        ActorId.CAR_C: ActorPlan(start_time=float(start_time)),
    }
    return plans, SyncPlan(ActorId.CAR_C, float(sync_s), float(start_time), float(trigger))


def scenario2_template() -> ScenarioTemplate:
    """Left turn across car C, which times its approach to meet the ego."""
    actors = (
        ActorSpec(ActorId.EGO, _s2_ego_route(), VEHICLE_RADIUS, 15.0, 7.0, 4.5, 1.8),
        ActorSpec(ActorId.CAR_C, Polyline([[-22.0, -LANE], [40.0, -LANE]]),
                  VEHICLE_RADIUS, 15.0, 7.0, 4.5, 1.8),
    )
    return ScenarioTemplate(
        template_id=TemplateId.SCENARIO2,
        actors=actors,
        space=scenario2_space(),
        planner=_plan_scenario2,
        occluders=(),
        conflicting=(ActorId.CAR_C,),
        primary_pair=(ActorId.EGO, ActorId.CAR_C),
        stop_on_collision=True,
        ego_params=EgoParams(v_target=6.0),
    )


def get_template(template_id, profile=None) -> ScenarioTemplate:
    template_id = TemplateId(template_id)
    template = scenario1_template() if template_id is TemplateId.SCENARIO1 else scenario2_template()
    if profile is not None:
        template = template.with_profile(profile)
    return template
