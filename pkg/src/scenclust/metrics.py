"""Criticality metrics over simulation traces.

Time-valued metrics are capped at ``T_CAP`` seconds, which stands in for
"no conflict". All series are symmetric in the actor pair.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .simulator.engine import SimulationTrace
from .simulator.templates import ActorId, PEDESTRIAN_RADIUS, ScenarioTemplate

T_CAP = 30.0
VEHICLE_A_MAX = 7.0
PEDESTRIAN_A_MAX = 1.5
PET_ZONE_RADIUS = 2.0
MIN_CLOSING_SPEED = 1e-6


class Metric(str, Enum):
    EUCLIDEAN = "Euclidean"
    TRAJECTORY_DISTANCE = "TrajectoryDistance"
    TTC = "TTC"
    WTTC = "WTTC"
    PET = "PET"


class Direction(str, Enum):
    MINIMIZE = "Minimize"
    MAXIMIZE = "Maximize"


DIRECTIONS = {m: Direction.MINIMIZE for m in Metric}


class MetricNotApplicable(ValueError):
    pass


@dataclass
class CriticalitySeries:
    metric: Metric
    pair: tuple
    values: np.ndarray
    dt: float
    direction: Direction = Direction.MINIMIZE

    @property
    def summary(self) -> float:
        return summarize(self)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "value"])
        for k, v in enumerate(self.values):
            w.writerow([repr(k * self.dt), repr(float(v))])
        return buf.getvalue()


def summarize(series) -> float:
    """Scalar objective: min for Minimize metrics, max for Maximize ones."""
    values = np.asarray(series.values if isinstance(series, CriticalitySeries) else series, float)
    direction = series.direction if isinstance(series, CriticalitySeries) else Direction.MINIMIZE
    if values.size == 0:
        raise ValueError("cannot summarize an empty series")
    return float(values.max() if direction is Direction.MAXIMIZE else values.min())


def _pair_arrays(trace: SimulationTrace, a, b):
    ia, ib = trace.index(a), trace.index(b)
    return ia, ib


def _series(metric, a, b, values, trace):
    return CriticalitySeries(Metric(metric), (ActorId(a), ActorId(b)),
                             np.asarray(values, dtype=float), trace.dt, DIRECTIONS[Metric(metric)])


def euclidean_values(trace, a, b) -> np.ndarray:
    ia, ib = _pair_arrays(trace, a, b)
    diff = trace.positions[:, ia] - trace.positions[:, ib]
    return np.hypot(diff[:, 0], diff[:, 1])


def euclidean_series(trace: SimulationTrace, a, b) -> CriticalitySeries:
    return _series(Metric.EUCLIDEAN, a, b, euclidean_values(trace, a, b), trace)


def trajectory_distance_series(trace: SimulationTrace, a, b,
                               template: ScenarioTemplate) -> CriticalitySeries:
    """Sum of the remaining route lengths to the shared conflict point.

    After either actor has passed the conflict point the value is frozen at
    the last upstream value, or the Euclidean distance if that is larger.
    """
    try:
        _, s_a_cp, s_b_cp = template.conflict_point(a, b)
    except ValueError as exc:
        raise MetricNotApplicable(str(exc)) from exc
    ia, ib = _pair_arrays(trace, a, b)
    rem_a = s_a_cp - trace.path_s[:, ia]
    rem_b = s_b_cp - trace.path_s[:, ib]
    upstream = (rem_a >= 0) & (rem_b >= 0)
    euclid = euclidean_values(trace, a, b)
    values = np.empty(trace.n_frames)
    frozen = None
    for k in range(trace.n_frames):
        if upstream[k] and frozen is None:
            values[k] = rem_a[k] + rem_b[k]
        else:
            if frozen is None:
                frozen = values[k - 1] if k > 0 else 0.0
            values[k] = max(frozen, euclid[k])
    return _series(Metric.TRAJECTORY_DISTANCE, a, b, values, trace)


def ttc_values(trace, a, b, t_cap=T_CAP) -> np.ndarray:
    ia, ib = _pair_arrays(trace, a, b)
    rel_p = trace.positions[:, ia] - trace.positions[:, ib]
    rel_v = trace.velocities[:, ia] - trace.velocities[:, ib]
    dist = np.hypot(rel_p[:, 0], rel_p[:, 1])
    gap = dist - trace.radii[ia] - trace.radii[ib]
    with np.errstate(invalid="ignore", divide="ignore"):
        closing = -np.einsum("ij,ij->i", rel_p, rel_v) / dist
    closing = np.where(dist > 0, closing, 0.0)
    out = np.full(trace.n_frames, t_cap)
    hit = closing > MIN_CLOSING_SPEED
    out[hit] = np.clip(gap[hit] / closing[hit], 0.0, t_cap)
    out[gap <= 0] = 0.0
    return out


def ttc_series(trace: SimulationTrace, a, b, t_cap=T_CAP) -> CriticalitySeries:
    return _series(Metric.TTC, a, b, ttc_values(trace, a, b, t_cap), trace)


def default_a_max(actor_id) -> float:
    return PEDESTRIAN_A_MAX if ActorId(actor_id) is ActorId.PEDESTRIAN else VEHICLE_A_MAX


def wttc_time(gap, speed_sum, accel_sum, t_cap=T_CAP):
    """Smallest t >= 0 with speed_sum*t + accel_sum*t^2/2 = gap, capped.

    Vectorized over numpy arrays.
    """
    gap = np.asarray(gap, dtype=float)
    speed_sum = np.broadcast_to(np.asarray(speed_sum, dtype=float), gap.shape)
    accel_sum = np.broadcast_to(np.asarray(accel_sum, dtype=float), gap.shape)
    g = np.maximum(gap, 0.0)
    # stable form of the positive root: 2g / (v + sqrt(v^2 + 2ag))
    disc = np.sqrt(speed_sum ** 2 + 2.0 * accel_sum * g)
    denom = speed_sum + disc
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denom > 0, 2.0 * g / denom, np.inf)
    t = np.where(g <= 0, 0.0, t)
    return np.minimum(t, t_cap)


def wttc_series(trace: SimulationTrace, a, b, a_max=None, t_cap=T_CAP) -> CriticalitySeries:
    """Worst-case time to collision: both actors accelerate straight at each other.

    ``a_max`` is either a scalar applied to both actors or an (a, b) pair;
    by default vehicles use 7 m/s^2 and pedestrians 1.5 m/s^2.
    """
    if a_max is None:
        acc = default_a_max(a) + default_a_max(b)
    elif np.ndim(a_max) == 0:
        if a_max <= 0:
            raise ValueError("a_max must be positive")
        acc = 2.0 * float(a_max)
    else:
        if min(a_max) <= 0:
            raise ValueError("a_max must be positive")
        acc = float(a_max[0]) + float(a_max[1])
    ia, ib = _pair_arrays(trace, a, b)
    gap = euclidean_values(trace, a, b) - trace.radii[ia] - trace.radii[ib]
    speeds = (np.hypot(*trace.velocities[:, ia].T) + np.hypot(*trace.velocities[:, ib].T))
    return _series(Metric.WTTC, a, b, wttc_time(gap, speeds, acc, t_cap), trace)


def _occupancy_interval(inside: np.ndarray, dt: float):
    idx = np.flatnonzero(inside)
    if idx.size == 0:
        return None
    return idx[0] * dt, idx[-1] * dt


def pet(trace: SimulationTrace, a, b, center, radius=PET_ZONE_RADIUS,
        t_cap=T_CAP) -> CriticalitySeries:
    """Post-encroachment time for a circular conflict zone (single value)."""
    center = np.asarray(center, dtype=float)
    ia, ib = _pair_arrays(trace, a, b)
    in_a = np.hypot(*(trace.positions[:, ia] - center).T) <= radius
    in_b = np.hypot(*(trace.positions[:, ib] - center).T) <= radius
    occ_a = _occupancy_interval(in_a, trace.dt)
    occ_b = _occupancy_interval(in_b, trace.dt)
    if occ_a is None or occ_b is None:
        value = t_cap
    else:
        first, second = sorted([occ_a, occ_b])
        value = min(max(second[0] - first[1], 0.0), t_cap)
    return _series(Metric.PET, a, b, [value], trace)


def pet_for_template(trace, a, b, template: ScenarioTemplate, radius=PET_ZONE_RADIUS):
    try:
        point, _, _ = template.conflict_point(a, b)
    except ValueError as exc:
        raise MetricNotApplicable(str(exc)) from exc
    return pet(trace, a, b, point, radius)


def compute_series(metric, trace: SimulationTrace, a, b,
                   template: ScenarioTemplate | None = None) -> CriticalitySeries:
    metric = Metric(metric)
    if metric is Metric.EUCLIDEAN:
        return euclidean_series(trace, a, b)
    if metric is Metric.TTC:
        return ttc_series(trace, a, b)
    if metric is Metric.WTTC:
        return wttc_series(trace, a, b)
    if template is None:
        raise ValueError(f"{metric.value} needs the scenario template")
    if metric is Metric.TRAJECTORY_DISTANCE:
        return trajectory_distance_series(trace, a, b, template)
    return pet_for_template(trace, a, b, template)
