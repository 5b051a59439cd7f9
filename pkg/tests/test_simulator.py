from dataclasses import replace

import numpy as np
import pytest

from scenclust.scenario import make_scenario
from scenclust.simulator.engine import SimulationTrace, Termination, simulate
from scenclust.simulator.geometry import line_of_sight
from scenclust.simulator.templates import ActorId, ActorPlan, get_template

S1 = get_template("Scenario1")
S2 = get_template("Scenario2")


def run(template, values):
    return simulate(make_scenario(template.space, values, "Grid"), template)


def hidden_frames(trace, template):
    e, p = trace.index(ActorId.EGO), trace.index(ActorId.PEDESTRIAN)
    occ = [trace.index(o) for o in template.occluders]
    out = []
    for k in range(trace.n_frames):
        bodies = [template.actors[j].body(trace.positions[k, j], trace.headings[k, j]) for j in occ]
        out.append(not line_of_sight(trace.positions[k, e], trace.positions[k, p], bodies))
    return np.array(out)


def test_deterministic():
    a, b = run(S1, (12.0, 4.0, 7.0)), run(S1, (12.0, 4.0, 7.0))
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.velocities, b.velocities)
    assert a.termination == b.termination


def test_frames_spaced_by_dt_and_bounded_displacement():
    trace = run(S1, (5.0, 1.0, 11.0))
    assert np.allclose(np.diff(trace.times), 0.05)
    step = np.linalg.norm(np.diff(trace.positions, axis=0), axis=2)
    vmax = np.array([S1.actor(a).max_speed for a in trace.actor_ids])
    assert np.all(step <= vmax * trace.dt + 1e-9)


def test_overlapping_spawn_collides_at_t0():
    _, s_ego, s_c = S2.conflict_point(ActorId.EGO, ActorId.CAR_C)

    def planner(values):
        return {ActorId.EGO: ActorPlan(initial_s=s_ego),
                ActorId.CAR_C: ActorPlan(initial_s=s_c, speed=5.0)}, None

    trace = run(replace(S2, planner=planner), (10.0, 0.0, 0.0))
    assert trace.termination == Termination.COLLISION
    assert trace.collision_time == 0.0
    assert trace.n_frames == 1


def test_collision_trace_stops_early():
    # car C starts late enough that the ego has committed to the turn
    hits = [run(S2, (s, t0, 10.0)) for s in (8.0, 12.0, 16.0) for t0 in (1.7, 1.8, 1.9)]
    collided = [t for t in hits if t.termination == Termination.COLLISION]
    assert collided
    for t in collided:
        assert t.duration < S2.timeout
        assert t.collision_time == pytest.approx(t.duration)


def test_late_pedestrian_keeps_distance():
    trace = run(S1, (0.0, 10.0, 7.0))
    e, p = trace.index(ActorId.EGO), trace.index(ActorId.PEDESTRIAN)
    d = np.linalg.norm(trace.positions[:, e] - trace.positions[:, p], axis=1)
    assert d.min() > 2.0


def test_pedestrian_occluded_for_at_least_a_second():
    hid = hidden_frames(run(S1, (20.0, 3.0, 8.0)), S1)
    longest = run_len = 0
    for h in hid:
        run_len = run_len + 1 if h else 0
        longest = max(longest, run_len)
    assert longest * 0.05 >= 1.0


def test_scenario1_continues_after_collision():
    assert not S1.stop_on_collision
    for vals in [(0.0, 0.0, 3.0), (40.0, 10.0, 12.0), (20.0, 5.0, 7.5)]:
        assert run(S1, vals).termination != Termination.COLLISION


def test_csv_round_trip(tmp_path):
    trace = run(S2, (12.0, 1.0, 8.0))
    path = tmp_path / "trace.csv"
    trace.save(path)
    back = SimulationTrace.load(path)
    assert back.actor_ids == trace.actor_ids and back.termination == trace.termination
    assert back.collision_time == trace.collision_time
    for name in ("positions", "velocities", "headings", "path_s", "radii"):
        assert np.array_equal(getattr(back, name), getattr(trace, name))


def test_csv_row_count_checked():
    trace = run(S2, (12.0, 1.0, 8.0))
    text = trace.to_csv().rsplit("\n", 2)[0] + "\n"
    with pytest.raises(ValueError):
        SimulationTrace.from_csv(text, trace.meta())


def test_wrong_dimension_rejected():
    with pytest.raises(ValueError):
        simulate((1.0, 2.0), S1)


def test_unknown_actor_raises():
    with pytest.raises(KeyError):
        run(S2, (12.0, 1.0, 8.0)).index(ActorId.PEDESTRIAN)


@pytest.mark.parametrize("template,values", [(S1, (10.0, 5.0, 10.0)), (S2, (12.0, 1.8, 10.0)),
                                             (S2, (20.0, 0.5, 25.0))])
def test_trace_invariants(template, values):
    trace = run(template, values)
    assert trace.n_frames >= 1
    assert np.all(np.diff(trace.path_s, axis=0) >= -1e-12)
    speed = np.linalg.norm(trace.velocities, axis=2)
    vmax = np.array([template.actor(a).max_speed for a in trace.actor_ids])
    assert np.all(speed <= vmax + 1e-9)
    e = trace.index(ActorId.EGO)
    d = np.linalg.norm(trace.positions[-1] - trace.positions[-1, e], axis=1)
    overlap = np.any((d < trace.radii + trace.radii[e]) & (np.arange(len(d)) != e))
    if template.stop_on_collision:
        assert (trace.termination == Termination.COLLISION) == overlap
