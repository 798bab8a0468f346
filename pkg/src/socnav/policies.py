"""Robot policies: scripted baselines and the value-network policy."""

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Action, JointState, wrap_angle
from .kinematics import StepConfig
from .orca import OrcaConfig, orca_halfplanes, preferred_velocity, solve_velocity
from .reward import AblationFlags, RewardConfig
from .training import DiscountRule, select_action


def project_to_action(velocity, theta: float, actions) -> Action:
    """Nearest discrete unicycle action: minimize the distance between the
    action's resulting velocity and the requested holonomic velocity."""
    vx, vy = velocity
    best, best_d = None, math.inf
    for a in actions:  # ties go to the earliest action
        h = theta + a.dtheta
        dx = a.v * math.cos(h) - vx
        dy = a.v * math.sin(h) - vy
        d = dx * dx + dy * dy
        if d < best_d:
            best, best_d = a, d
    return best


@dataclass
class StraightPolicy:
    """Full speed, heading change closest to the goal bearing."""

    actions: list

    def __call__(self, state: JointState, t: float) -> Action:
        rob = state.robot
        bearing = math.atan2(rob.gy - rob.py, rob.gx - rob.px)
        want = wrap_angle(bearing - rob.theta)
        moving = [a for a in self.actions if a.v > 0]
        return min(moving, key=lambda a: abs(a.dtheta - want))


@dataclass
class OrcaPolicy:
    """Holonomic reciprocal-avoidance command projected onto the discrete
    unicycle action set. Used for demonstrations and as a baseline."""

    actions: list
    orca_cfg: OrcaConfig
    step_cfg: StepConfig

    def __call__(self, state: JointState, t: float) -> Action:
        rob = state.robot
        planes = orca_halfplanes(rob, state.humans, self.orca_cfg)
        pref = preferred_velocity(rob, self.step_cfg.dt)
        if rob.v_pref == 0:
            return Action(0.0, 0.0)
        v = solve_velocity(planes, pref, rob.v_pref)
        return project_to_action(v, rob.theta, self.actions)


@dataclass
class ValueNetPolicy:
    """One-step-lookahead policy over the learned state value. epsilon > 0
    requires an rng; the greedy policy (epsilon = 0) never touches one."""

    params: object
    actions: list
    reward_cfg: RewardConfig
    rule: DiscountRule
    flags: AblationFlags = field(default_factory=AblationFlags)
    static_ids: frozenset = frozenset()
    epsilon: float = 0.0
    rng: np.random.Generator = None

    def __call__(self, state: JointState, t: float) -> Action:
        return select_action(self.params, state, self.actions, self.epsilon,
                             self.reward_cfg, self.rule, self.rng,
                             flags=self.flags, static_ids=self.static_ids, t=t)
