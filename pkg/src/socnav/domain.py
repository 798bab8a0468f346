"""Core state/action types, the robot-centric transform, and the discrete action space."""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class FullAgentState:
    """Full agent state: observable part (px, py, vx, vy, radius) plus
    hidden part (gx, gy, v_pref, theta)."""

    px: float
    py: float
    vx: float
    vy: float
    radius: float
    gx: float
    gy: float
    v_pref: float
    theta: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.v_pref < 0:
            raise ValueError(f"v_pref must be non-negative, got {self.v_pref}")

    @property
    def position(self):
        return (self.px, self.py)

    @property
    def velocity(self):
        return (self.vx, self.vy)

    @property
    def goal(self):
        return (self.gx, self.gy)

    def observable(self) -> "ObservableState":
        return ObservableState(self.px, self.py, self.vx, self.vy, self.radius)


@dataclass(frozen=True)
class ObservableState:
    """The 5 observable quantities of an agent. No goal or preference leakage."""

    px: float
    py: float
    vx: float
    vy: float
    radius: float

    @property
    def position(self):
        return (self.px, self.py)

    @property
    def velocity(self):
        return (self.vx, self.vy)


@dataclass(frozen=True)
class JointState:
    """Robot full state plus the observable states of all humans.

    Human ordering is stable within an episode: index is identity.
    """

    robot: FullAgentState
    humans: tuple

    def __post_init__(self):
        object.__setattr__(self, "humans", tuple(self.humans))


@dataclass(frozen=True)
class Action:
    """Robot command: linear speed v and heading change dtheta for one decision step.

    The stop action is (0, 0); moving actions run at the robot's preferred speed.
    """

    v: float
    dtheta: float


@dataclass(frozen=True)
class RotatedState:
    """Joint state in the robot-centric frame (x-axis = robot heading).

    robot part: (d_g, v_pref, theta_rel, radius) where theta_rel is the goal
    direction expressed in the robot frame. Each human is the 7-tuple
    (px, py, vx, vy, radius, d_robot, radius_sum) with positions/velocities
    rotated into the robot frame and d_robot the robot-to-human center distance.
    """

    d_g: float
    v_pref: float
    theta_rel: float
    radius: float
    humans: tuple  # of 7-tuples


def wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi); exact no-op for angles already in range."""
    if -math.pi <= a < math.pi:
        return a
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def rotate_to_robot_frame(state: JointState) -> RotatedState:
    """Express the joint state in the robot-centric frame.

    The robot reduces to (d_g, v_pref, theta_rel, radius); each human maps to
    (px~, py~, vx~, vy~, r~, d_i, r~+r). Invariant under global translation
    and rotation of the world.
    """
    rob = state.robot
    dx = rob.gx - rob.px
    dy = rob.gy - rob.py
    d_g = math.hypot(dx, dy)
    theta_rel = wrap_angle(math.atan2(dy, dx) - rob.theta)

    cos_h = math.cos(rob.theta)
    sin_h = math.sin(rob.theta)
    humans = []
    for h in state.humans:
        ox = h.px - rob.px
        oy = h.py - rob.py
        px = cos_h * ox + sin_h * oy
        py = -sin_h * ox + cos_h * oy
        vx = cos_h * h.vx + sin_h * h.vy
        vy = -sin_h * h.vx + cos_h * h.vy
        d_i = math.hypot(ox, oy)
        humans.append((px, py, vx, vy, h.radius, d_i, h.radius + rob.radius))
    return RotatedState(d_g, rob.v_pref, theta_rel, rob.radius, tuple(humans))


def build_action_space(v_pref: float, n_headings: int = 10,
                       dtheta_max: float = math.radians(10.0)) -> list:
    """One stop action plus n_headings moving actions at speed v_pref, heading
    changes evenly spaced over [-dtheta_max, +dtheta_max] inclusive.

    Deterministic ordering: stop first, then ascending dtheta.
    """
    if n_headings < 1:
        raise ValueError("n_headings must be >= 1")
    if dtheta_max <= 0:
        raise ValueError("dtheta_max must be positive")
    actions = [Action(0.0, 0.0)]
    if n_headings == 1:
        return actions + [Action(v_pref, 0.0)]
    step = 2.0 * dtheta_max / (n_headings - 1)
    for k in range(n_headings):
        actions.append(Action(v_pref, -dtheta_max + k * step))
    return actions
