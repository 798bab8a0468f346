import math

import numpy as np
import pytest

from socnav.domain import (Action, FullAgentState, JointState, ObservableState,
                           build_action_space, rotate_to_robot_frame)


def make_robot(px=0.0, py=-4.0, gx=0.0, gy=4.0, theta=math.pi / 2, **kw):
    return FullAgentState(px, py, kw.get("vx", 0.0), kw.get("vy", 0.0),
                          kw.get("radius", 0.3), gx, gy,
                          kw.get("v_pref", 1.0), theta)


def test_type_invariants():
    with pytest.raises(ValueError):
        FullAgentState(0, 0, 0, 0, -0.1, 0, 0, 1, 0)
    with pytest.raises(ValueError):
        FullAgentState(0, 0, 0, 0, 0.3, 0, 0, -1, 0)


def test_goal_distance():
    # robot at (0,-4), goal (0,4)
    state = JointState(make_robot(), ())
    assert rotate_to_robot_frame(state).d_g == pytest.approx(8.0)


def test_human_along_heading_maps_to_x_axis():
    robot = make_robot(theta=math.pi / 2)
    human = ObservableState(0.0, -2.0, 0.0, 0.0, 0.3)  # 2 m along heading
    rot = rotate_to_robot_frame(JointState(robot, (human,)))
    px, py = rot.humans[0][0], rot.humans[0][1]
    assert px == pytest.approx(2.0, abs=1e-12)
    assert py == pytest.approx(0.0, abs=1e-12)


def test_theta_rel_zero_when_aimed_at_goal():
    robot = make_robot(theta=math.pi / 2)  # aimed straight at (0, 4)
    rot = rotate_to_robot_frame(JointState(robot, ()))
    assert rot.theta_rel == pytest.approx(0.0, abs=1e-12)


def _rotate_world(state: JointState, phi: float, shift=(0.0, 0.0)):
    c, s = math.cos(phi), math.sin(phi)

    def rot(x, y):
        return c * x - s * y + shift[0], s * x + c * y + shift[1]

    def rotv(x, y):
        return c * x - s * y, s * x + c * y

    r = state.robot
    px, py = rot(r.px, r.py)
    gx, gy = rot(r.gx, r.gy)
    vx, vy = rotv(r.vx, r.vy)
    robot = FullAgentState(px, py, vx, vy, r.radius, gx, gy, r.v_pref,
                           r.theta + phi)
    humans = []
    for h in state.humans:
        hx, hy = rot(h.px, h.py)
        hvx, hvy = rotv(h.vx, h.vy)
        humans.append(ObservableState(hx, hy, hvx, hvy, h.radius))
    return JointState(robot, tuple(humans))


def test_frame_invariance_under_rigid_motion():
    rng = np.random.default_rng(7)
    for _ in range(50):
        robot = FullAgentState(*rng.uniform(-3, 3, 2), *rng.uniform(-1, 1, 2),
                               0.3, *rng.uniform(-3, 3, 2), 1.0,
                               rng.uniform(-math.pi, math.pi))
        humans = tuple(ObservableState(*rng.uniform(-3, 3, 2),
                                       *rng.uniform(-1, 1, 2), 0.3)
                       for _ in range(3))
        state = JointState(robot, humans)
        moved = _rotate_world(state, rng.uniform(-math.pi, math.pi),
                              shift=tuple(rng.uniform(-5, 5, 2)))
        a = rotate_to_robot_frame(state)
        b = rotate_to_robot_frame(moved)
        assert a.d_g == pytest.approx(b.d_g, abs=1e-9)
        assert a.theta_rel == pytest.approx(b.theta_rel, abs=1e-9)
        for ha, hb in zip(a.humans, b.humans):
            for x, y in zip(ha, hb):
                assert x == pytest.approx(y, abs=1e-9)


def test_stored_human_distance_is_euclidean():
    rng = np.random.default_rng(3)
    for _ in range(100):
        robot = FullAgentState(*rng.uniform(-4, 4, 2), 0, 0, 0.3,
                               *rng.uniform(-4, 4, 2), 1.0,
                               rng.uniform(-math.pi, math.pi))
        human = ObservableState(*rng.uniform(-4, 4, 2), *rng.uniform(-1, 1, 2),
                                0.3)
        rot = rotate_to_robot_frame(JointState(robot, (human,)))
        expected = math.hypot(human.px - robot.px, human.py - robot.py)
        assert rot.humans[0][5] == pytest.approx(expected, abs=1e-9)
        assert rot.humans[0][6] == pytest.approx(0.6, abs=1e-12)


def test_action_space_size_and_order():
    actions = build_action_space(1.0, n_headings=10,
                                 dtheta_max=math.radians(10))
    assert len(actions) == 11
    assert actions[0] == Action(0.0, 0.0)
    assert sum(1 for a in actions if a.v == 0.0) == 1
    dthetas = [a.dtheta for a in actions[1:]]
    assert dthetas == sorted(dthetas)
    assert all(a.v == 1.0 for a in actions[1:])


def test_action_space_spacing():
    actions = build_action_space(1.0, n_headings=10,
                                 dtheta_max=math.radians(10))
    gaps = [b.dtheta - a.dtheta
            for a, b in zip(actions[1:], actions[2:])]
    expected = math.radians(20.0) / 9.0
    for g in gaps:
        assert g == pytest.approx(expected, abs=1e-12)
    assert actions[1].dtheta == pytest.approx(-math.radians(10))
    assert actions[-1].dtheta == pytest.approx(math.radians(10))


def test_action_space_deterministic():
    a = build_action_space(1.3, 7, 0.2)
    b = build_action_space(1.3, 7, 0.2)
    assert a == b
