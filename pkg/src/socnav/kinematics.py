"""State propagation over one decision step: nonholonomic robot, holonomic humans."""

import math
from dataclasses import dataclass, replace

from .domain import Action, FullAgentState, wrap_angle


@dataclass(frozen=True)
class StepConfig:
    dt: float = 0.25

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")


def propagate_robot(state: FullAgentState, action: Action, cfg: StepConfig) -> FullAgentState:
    """Rotate-then-translate: heading updates first, then the robot advances
    along the new heading for dt."""
    theta = wrap_angle(state.theta + action.dtheta)
    vx = action.v * math.cos(theta)
    vy = action.v * math.sin(theta)
    return replace(state,
                   px=state.px + vx * cfg.dt,
                   py=state.py + vy * cfg.dt,
                   vx=vx, vy=vy, theta=theta)


def propagate_human(state: FullAgentState, new_velocity, cfg: StepConfig) -> FullAgentState:
    """Holonomic update: position advances by new_velocity * dt.

    Heading follows the velocity direction when moving; a speed above v_pref
    signals a crowd-policy bug.
    """
    vx, vy = new_velocity
    speed = math.hypot(vx, vy)
    if speed > state.v_pref + 1e-9:
        raise ValueError(
            f"human velocity {speed:.6f} exceeds v_pref {state.v_pref:.6f}")
    theta = math.atan2(vy, vx) if speed > 0 else state.theta
    return replace(state,
                   px=state.px + vx * cfg.dt,
                   py=state.py + vy * cfg.dt,
                   vx=vx, vy=vy, theta=theta)
