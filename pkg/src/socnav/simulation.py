"""Scenario generation (circle crossing plus static-obstacle layouts) and the
episode loop tying robot policy, crowd policy, kinematics, and reward together.
"""

import math
from dataclasses import dataclass

import numpy as np

from .domain import FullAgentState, JointState
from .kinematics import StepConfig, propagate_human, propagate_robot
from .orca import OrcaConfig, crowd_step
from .reward import (AblationFlags, RewardConfig, at_goal, min_separation,
                     total_reward)

ENV_TYPES = ("none", "separated", "two_barriers", "concave")

OUTCOME_SUCCESS = "success"
OUTCOME_COLLISION = "collision"
OUTCOME_TIMEOUT = "timeout"

MAX_PLACEMENT_ATTEMPTS = 10_000

# rng stream tags, one per pipeline phase, so that e.g. demo episode 3 and
# evaluation episode 3 do not share a scenario
STREAM_DEMO = 0
STREAM_RL = 1
STREAM_EVAL = 2


class ScenarioError(Exception):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    circle_radius: float = 4.0
    n_dynamic: int = 5
    n_static: int = 0
    env_type: str = "none"
    robot_start: tuple = (0.0, -4.0)
    robot_goal: tuple = (0.0, 4.0)
    perturbation: float = 0.5
    agent_radius: float = 0.3
    v_pref: float = 1.0

    def __post_init__(self):
        if self.circle_radius <= 0:
            raise ValueError("circle_radius must be positive")
        if self.n_dynamic < 0 or self.n_static < 0:
            raise ValueError("agent counts must be non-negative")
        if self.env_type not in ENV_TYPES:
            raise ValueError(f"env_type must be one of {ENV_TYPES}")
        object.__setattr__(self, "robot_start", tuple(self.robot_start))
        object.__setattr__(self, "robot_goal", tuple(self.robot_goal))


@dataclass(frozen=True)
class Scenario:
    robot: FullAgentState
    humans: tuple       # FullAgentState, statics first then dynamics
    static_ids: frozenset

    def joint_state(self) -> JointState:
        return JointState(self.robot, tuple(h.observable() for h in self.humans))


@dataclass(frozen=True)
class StepSnapshot:
    """One row of an episode: the world at time t, the reward earned arriving
    here (None at t = 0) and the action chosen here (None on the terminal row).
    """

    t: float
    robot: FullAgentState
    humans: tuple
    action: object
    reward: object


@dataclass(frozen=True)
class EpisodeRecord:
    steps: tuple            # StepSnapshot
    outcome: str
    nav_time: float
    discomfort_steps: int   # pre-terminal transitions with 0 <= d_t < d_disc
    n_steps: int            # number of transitions
    static_ids: frozenset


def episode_rng(master_seed: int, episode_index: int, stream: int = STREAM_EVAL):
    """Independent, reproducible generator for one episode of one phase."""
    seq = np.random.SeedSequence((int(master_seed), int(stream), int(episode_index)))
    return np.random.default_rng(seq)


def _disc_jitter(rng, magnitude):
    if magnitude <= 0:
        return 0.0, 0.0
    ang = rng.uniform(0.0, 2.0 * math.pi)
    r = magnitude * math.sqrt(rng.uniform())
    return r * math.cos(ang), r * math.sin(ang)


def static_positions(cfg: ScenarioConfig, rng) -> list:
    """Static-obstacle layout between start and goal, by environment type."""
    n = cfg.n_static
    if cfg.env_type == "none" or n == 0:
        return []
    if cfg.env_type == "separated":
        # ring at half the crossing radius, jittered per seed
        pts = []
        for k in range(n):
            a = math.radians(90.0) + k * 2.0 * math.pi / n
            jx, jy = _disc_jitter(rng, 0.2)
            pts.append((2.0 * math.cos(a) + jx, 2.0 * math.sin(a) + jy))
        return pts
    if cfg.env_type == "two_barriers":
        top = n // 2
        bottom = n - top
        pts = []
        for row_n, y in ((top, 1.0), (bottom, -1.0)):
            for i in range(row_n):
                pts.append(((i - (row_n - 1) / 2.0) * 0.7, y))
        return pts
    # concave: arc opening toward -y (toward the robot start)
    pts = []
    for k in range(n):
        a = math.pi * k / (n - 1) if n > 1 else math.pi / 2.0
        pts.append((1.2 * math.cos(a), 1.2 * math.sin(a)))
    return pts


def generate_scenario(cfg: ScenarioConfig, rng) -> Scenario:
    """Dynamic humans rejection-sampled on the crossing circle with antipodal
    goals; static humans by layout; robot start/goal jittered by at most the
    configured perturbation."""
    jx, jy = _disc_jitter(rng, cfg.perturbation)
    start = (cfg.robot_start[0] + jx, cfg.robot_start[1] + jy)
    jx, jy = _disc_jitter(rng, cfg.perturbation)
    goal = (cfg.robot_goal[0] + jx, cfg.robot_goal[1] + jy)
    theta = math.atan2(goal[1] - start[1], goal[0] - start[0])
    robot = FullAgentState(start[0], start[1], 0.0, 0.0, cfg.agent_radius,
                           goal[0], goal[1], cfg.v_pref, theta)

    humans = []
    for (sx, sy) in static_positions(cfg, rng):
        humans.append(FullAgentState(sx, sy, 0.0, 0.0, cfg.agent_radius,
                                     sx, sy, 0.0, 0.0))
    static_ids = frozenset(range(len(humans)))

    clearance = 2.0 * cfg.agent_radius + 0.2
    attempts = 0
    for _ in range(cfg.n_dynamic):
        while True:
            attempts += 1
            if attempts > MAX_PLACEMENT_ATTEMPTS:
                raise ScenarioError(
                    f"could not place {cfg.n_dynamic} dynamic humans after "
                    f"{MAX_PLACEMENT_ATTEMPTS} attempts")
            angle = rng.uniform(0.0, 2.0 * math.pi)
            bx = cfg.circle_radius * math.cos(angle)
            by = cfg.circle_radius * math.sin(angle)
            jx, jy = _disc_jitter(rng, cfg.perturbation)
            px, py = bx + jx, by + jy
            others = [(robot.px, robot.py)] + [(h.px, h.py) for h in humans]
            if all(math.hypot(px - ox, py - oy) >= clearance for ox, oy in others):
                break
        gx, gy = -bx, -by  # opposite side of the circle, before jitter
        theta_h = math.atan2(gy - py, gx - px)
        humans.append(FullAgentState(px, py, 0.0, 0.0, cfg.agent_radius,
                                     gx, gy, cfg.v_pref, theta_h))
    return Scenario(robot, tuple(humans), static_ids)


def run_episode(policy, scenario: Scenario, reward_cfg: RewardConfig,
                step_cfg: StepConfig, orca_cfg: OrcaConfig,
                flags: AblationFlags = AblationFlags(),
                t_limit: float = None) -> EpisodeRecord:
    """Single episode: the policy and the crowd both read the same pre-step
    snapshot, then everyone moves simultaneously. Terminates on collision
    (d_t < 0), goal arrival, or the time limit."""
    if t_limit is None:
        t_limit = reward_cfg.t_limit
    robot = scenario.robot
    humans = list(scenario.humans)
    static_ids = scenario.static_ids

    steps = []
    t = 0.0
    step_index = 0
    arrival = None
    discomfort = 0
    outcome = None
    while True:
        joint = JointState(robot, tuple(h.observable() for h in humans))
        action = policy(joint, t)
        steps.append(StepSnapshot(t, robot, tuple(humans), action, arrival))

        velocities = crowd_step(humans, orca_cfg, robot=robot)
        next_robot = propagate_robot(robot, action, step_cfg)
        next_humans = [propagate_human(h, v, step_cfg)
                       for h, v in zip(humans, velocities)]
        t_next = t + step_cfg.dt
        step_index += 1
        next_joint = JointState(next_robot,
                                tuple(h.observable() for h in next_humans))
        arrival = total_reward(joint, next_joint, action, t_next, reward_cfg,
                               flags, static_ids)

        d_t = min_separation(next_joint)
        if d_t < 0:
            outcome = OUTCOME_COLLISION
        elif at_goal(next_joint, reward_cfg):
            outcome = OUTCOME_SUCCESS
        elif t_next >= t_limit - 1e-9:
            outcome = OUTCOME_TIMEOUT
        elif 0 <= d_t < reward_cfg.d_disc:
            discomfort += 1

        robot, humans, t = next_robot, next_humans, t_next
        if outcome is not None:
            steps.append(StepSnapshot(t, robot, tuple(humans), None, arrival))
            break

    return EpisodeRecord(steps=tuple(steps), outcome=outcome, nav_time=t,
                         discomfort_steps=discomfort, n_steps=step_index,
                         static_ids=static_ids)
