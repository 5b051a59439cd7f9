import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from scenclust.simulator.behavior import (HEADWAYS, EgoParams, EgoState, Percept, Profile,
                                          conflicting_actors, ego_behavior_step)

P = EgoParams()


def pedestrian(ego_d, actor_d=4.2, speed=1.4, visible=True):
    return Percept("Pedestrian", visible, ego_d, actor_d, speed, 1.3)


@given(st.floats(0, 15))
def test_cruise_law_without_conflicts(v):
    cmd = ego_behavior_step(EgoState(v, 0.0), [], Profile.NORMAL)
    assert cmd == min(max(P.k_cruise * (P.v_target - v), -P.b_max), P.a_max)


def test_visible_pedestrian_in_envelope_brakes():
    # ego arrives in 2.5 s, pedestrian in 3 s
    assert ego_behavior_step(EgoState(8.0, 0.0), [pedestrian(20.0)], Profile.NORMAL) == -P.b_max


def test_hidden_pedestrian_is_ignored():
    assert ego_behavior_step(EgoState(8.0, 0.0), [pedestrian(20.0, visible=False)],
                             Profile.NORMAL) == 0.0


def test_pedestrian_in_zone_always_brakes():
    state = EgoState(8.0, 0.0)
    assert conflicting_actors(state, [pedestrian(60.0, actor_d=0.5)], Profile.AGGRESSIVE)


def test_latch_holds_until_actor_cleared():
    state = EgoState(0.5, 0.0, frozenset({"Pedestrian"}))
    # out of sight and far apart in time, still yielding
    assert conflicting_actors(state, [pedestrian(80.0, visible=False)], Profile.NORMAL)
    cleared = Percept("Pedestrian", True, 5.0, -2.0, 1.4, 1.3)
    assert not conflicting_actors(state, [cleared], Profile.NORMAL)


def brake_onset(profile, speed=8.0):
    """Largest ego distance (approaching from far) at which braking fires."""
    for d10 in range(1000, -1, -1):
        d = d10 / 10
        if ego_behavior_step(EgoState(speed, 0.0), [pedestrian(d)], profile) == -P.b_max:
            return d
    return -math.inf


def test_brake_onset_ordering():
    onset = {p: brake_onset(p) for p in Profile}
    assert onset[Profile.CAUTIOUS] >= onset[Profile.NORMAL] >= onset[Profile.AGGRESSIVE]
    # arrival-time arithmetic: t_ped = 3 s, onset at v (3 + headway)
    for p in Profile:
        assert onset[p] == pytest.approx(8.0 * (3.0 + HEADWAYS[p]), abs=0.11)


@given(st.floats(0, 15), st.floats(-5, 100), st.floats(-5, 20), st.floats(0, 3), st.booleans())
def test_command_always_clamped(v, ego_d, act_d, speed, visible):
    for profile in Profile:
        cmd = ego_behavior_step(EgoState(v, 0.0), [pedestrian(ego_d, act_d, speed, visible)], profile)
        assert -P.b_max <= cmd <= P.a_max
