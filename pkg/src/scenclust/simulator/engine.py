"""Fixed-step kinematic simulation of a concrete scenario."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from ..scenario import ConcreteScenario
from .behavior import EgoState, Percept, conflicting_actors, ego_behavior_step
from .geometry import line_of_sight
from .templates import ActorId, ActorPlan, ScenarioTemplate


class Termination(str, Enum):
    REACHED_GOAL = "ReachedGoal"
    COLLISION = "Collision"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class ActorState:
    actor_id: ActorId
    position: np.ndarray
    velocity: np.ndarray
    heading: float
    path_s: float


@dataclass
class SimulationTrace:
    """Per-frame kinematic states, stored as arrays indexed [frame, actor]."""

    scenario_id: int
    dt: float
    actor_ids: list
    radii: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    headings: np.ndarray
    path_s: np.ndarray
    termination: Termination
    collision_time: Optional[float] = None

    @property
    def n_frames(self) -> int:
        return self.positions.shape[0]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_frames) * self.dt

    @property
    def duration(self) -> float:
        return (self.n_frames - 1) * self.dt

    def index(self, actor_id) -> int:
        actor_id = ActorId(actor_id)
        try:
            return self.actor_ids.index(actor_id)
        except ValueError:
            raise KeyError(f"actor {actor_id.value} not in trace {self.scenario_id}") from None

    def radius(self, actor_id) -> float:
        return float(self.radii[self.index(actor_id)])

    def frame(self, k: int) -> dict:
        return {
            a: ActorState(a, self.positions[k, i], self.velocities[k, i],
                          float(self.headings[k, i]), float(self.path_s[k, i]))
            for i, a in enumerate(self.actor_ids)
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "actor_id", "x", "y", "vx", "vy", "heading", "path_s"])
        for k in range(self.n_frames):
            t = k * self.dt
            for i, a in enumerate(self.actor_ids):
                w.writerow([repr(float(t)), a.value,
                            repr(float(self.positions[k, i, 0])), repr(float(self.positions[k, i, 1])),
                            repr(float(self.velocities[k, i, 0])), repr(float(self.velocities[k, i, 1])),
                            repr(float(self.headings[k, i])), repr(float(self.path_s[k, i]))])
        return buf.getvalue()

    def meta(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "dt": self.dt,
            "actors": [a.value for a in self.actor_ids],
            "radii": [float(r) for r in self.radii],
            "n_frames": self.n_frames,
            "termination": self.termination.value,
            "collision_time": self.collision_time,
        }

    def save(self, csv_path) -> None:
        csv_path = Path(csv_path)
        csv_path.write_text(self.to_csv())
        csv_path.with_suffix(".json").write_text(json.dumps(self.meta(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, csv_path) -> "SimulationTrace":
        csv_path = Path(csv_path)
        meta = json.loads(csv_path.with_suffix(".json").read_text())
        return cls.from_csv(csv_path.read_text(), meta)

    @classmethod
    def from_csv(cls, text: str, meta: dict) -> "SimulationTrace":
        """Rebuild a trace from its CSV text and the ``meta()`` record."""
        actors = [ActorId(a) for a in meta["actors"]]
        n, m = meta["n_frames"], len(actors)
        data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1,
                          usecols=range(2, 8), ndmin=2)
        if data.shape[0] != n * m:
            raise ValueError(f"trace CSV has {data.shape[0]} rows, expected {n * m}")
        data = data.reshape(n, m, 6)
        return cls(
            scenario_id=meta["scenario_id"], dt=meta["dt"], actor_ids=actors,
            radii=np.array(meta["radii"]), positions=data[:, :, 0:2].copy(),
            velocities=data[:, :, 2:4].copy(), headings=data[:, :, 4].copy(),
            path_s=data[:, :, 5].copy(), termination=Termination(meta["termination"]),
            collision_time=meta["collision_time"],
        )


_NO_PLAN = ActorPlan()


def _ego_overlaps(pos, radii, ego):
    d = np.hypot(pos[:, 0] - pos[ego, 0], pos[:, 1] - pos[ego, 1])
    hit = d < radii + radii[ego]
    hit[ego] = False
    return bool(hit.any())


def simulate(scenario: ConcreteScenario, template: ScenarioTemplate) -> SimulationTrace:
    """Run ``scenario`` on ``template`` until goal, collision (if the template
    stops on collisions) or timeout. Deterministic."""
    values = scenario.values if isinstance(scenario, ConcreteScenario) else tuple(scenario)
    if len(values) != template.space.dim:
        raise ValueError(f"{template.template_id.value} expects {template.space.dim} "
                         f"parameters, got {len(values)}")
    scenario_id = scenario.id if isinstance(scenario, ConcreteScenario) else -1
    plans, sync = template.plan(values)
    specs = template.actors
    ids = [a.actor_id for a in specs]
    n_act = len(specs)
    ego = ids.index(ActorId.EGO)
    radii = np.array([a.radius for a in specs])
    lengths = np.array([a.route.length for a in specs])
    params = template.ego_params
    dt = template.dt
    max_steps = int(round(template.timeout / dt))

    s = np.array([min(plans.get(a, _NO_PLAN).initial_s, L) for a, L in zip(ids, lengths)])
    speed = np.array([plans.get(a, _NO_PLAN).speed for a in ids], dtype=float)
    start = np.array([plans.get(a, _NO_PLAN).start_time for a in ids], dtype=float)
    speed[ego] = params.v_target
    ego_s0 = s[ego]
    sync_idx = ids.index(sync.actor_id) if sync is not None else None
    synced = False
    yielding = frozenset()

    conflicts = []
    for other in template.conflicting:
        _, s_ego, s_other = template.conflict_point(ActorId.EGO, other)
        conflicts.append((ids.index(ActorId(other)), s_ego, s_other))
    occluders = [ids.index(ActorId(o)) for o in template.occluders]

    pos_log, vel_log, head_log, s_log = [], [], [], []
    collision_time = None
    termination = Termination.TIMEOUT

    for k in range(max_steps + 1):
        t = k * dt
        moving = np.array([
            (i == ego or t >= start[i] - 1e-9) and s[i] < lengths[i] for i in range(n_act)
        ])
        cur_speed = np.where(moving, speed, 0.0)
        pos = np.array([specs[i].route.point_at(s[i]) for i in range(n_act)])
        head = np.array([specs[i].route.heading_at(s[i]) for i in range(n_act)])
        vel = np.column_stack([cur_speed * np.cos(head), cur_speed * np.sin(head)])
        pos_log.append(pos)
        vel_log.append(vel)
        head_log.append(head)
        s_log.append(s.copy())

        if _ego_overlaps(pos, radii, ego):
            if collision_time is None:
                collision_time = t
            if template.stop_on_collision:
                termination = Termination.COLLISION
                break
        if np.all(s >= lengths - 1e-9):
            termination = Termination.REACHED_GOAL
            break
        if k == max_steps:
            break

        # car C speed rescaling, once
        if sync is not None and not synced and t >= sync.start_time - 1e-9 \
                and s[ego] - ego_s0 >= sync.trigger_distance - 1e-9:
            _, _, s_c_cp = _conflict_for(conflicts, sync_idx)
            speed[sync_idx] = _sync_speed(sync, s[ego], speed[ego], s_c_cp - s[sync_idx], params)
            synced = True
        elif sync is not None and not synced and t >= sync.start_time - 1e-9:
            speed[sync_idx] = sync.nominal_speed

        # ego decision
        percepts = []
        bodies = [specs[j].body(pos[j], head[j]) for j in occluders]
        for j, s_ego_cp, s_other_cp in conflicts:
            visible = line_of_sight(pos[ego], pos[j],
                                    [b for o, b in zip(occluders, bodies) if o != j])
            percepts.append(Percept(ids[j].value, visible, s_ego_cp - s[ego], s_other_cp - s[j],
                                    float(cur_speed[j]), float(radii[ego] + radii[j])))
        state = EgoState(float(speed[ego]), float(s[ego]), yielding)
        accel = ego_behavior_step(state, percepts, template.profile, params)
        yielding = conflicting_actors(state, percepts, template.profile, params)

        for i in range(n_act):
            if i == ego:
                v_new = min(max(speed[ego] + accel * dt, 0.0), params.v_max)
                s[ego] += 0.5 * (speed[ego] + v_new) * dt
                speed[ego] = v_new
            elif moving[i]:
                s[i] += speed[i] * dt
            if s[i] >= lengths[i]:
                s[i] = lengths[i]
                if i == ego:
                    speed[ego] = 0.0

    return SimulationTrace(
        scenario_id=scenario_id, dt=dt, actor_ids=ids, radii=radii,
        positions=np.array(pos_log), velocities=np.array(vel_log),
        headings=np.array(head_log), path_s=np.array(s_log),
        termination=termination, collision_time=collision_time,
    )


def _conflict_for(conflicts, idx):
    for c in conflicts:
        if c[0] == idx:
            return c
    raise KeyError(idx)


def _sync_speed(sync, ego_s, ego_speed, c_to_cp, params) -> float:
    remaining = sync.ego_sync_s - ego_s
    if c_to_cp <= 0.0:
        return sync.nominal_speed
    if remaining <= 0.0:
        return sync.v_max
    eta = remaining / max(ego_speed, params.v_predict_min)
    return float(min(max(c_to_cp / eta, sync.v_min), sync.v_max))
