"""Navigation reward: current-state term, look-ahead static/dynamic penalties,
and the time term.

total = r_c + r_st + r_dy + r_t, with the look-ahead and time terms
individually switchable for ablations.
"""

import math
from dataclasses import dataclass

from .domain import Action, JointState, ObservableState, wrap_angle


@dataclass(frozen=True)
class RewardConfig:
    d_disc: float = 0.2          # comfort distance (m)
    alpha: float = 0.15          # static look-ahead penalty weight
    beta: float = 0.5            # dynamic look-ahead penalty weight
    r_e: float = 1.0             # effective range (m)
    dt_static: float = 1.0       # static look-ahead horizon (s)
    dt_dynamic: float = 1.0      # dynamic look-ahead horizon (s)
    dt_lookahead: float = 1.0    # look-ahead distance horizon (s)
    t_limit: float = 25.0
    goal_tolerance: float = 0.3
    lookahead_substep: float = 0.05   # dynamic-horizon sampling step (s)
    clamp_dynamic: bool = True   # keep the dynamic term a pure penalty

    def __post_init__(self):
        for name in ("d_disc", "alpha", "beta", "r_e", "dt_static",
                     "dt_dynamic", "dt_lookahead", "t_limit",
                     "goal_tolerance", "lookahead_substep"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.d_disc >= self.r_e:
            raise ValueError("d_disc must be smaller than the effective range")


@dataclass(frozen=True)
class AblationFlags:
    """Reward-term switches for the ablation grid."""

    lookahead: bool = True
    time: bool = True

    @classmethod
    def from_name(cls, name: str) -> "AblationFlags":
        table = {
            "full": cls(True, True),
            "rc_only": cls(False, False),
            "rc_rl": cls(True, False),
            "rc_rt": cls(False, True),
        }
        if name not in table:
            raise ValueError(f"unknown ablation '{name}' (choose from {sorted(table)})")
        return table[name]


@dataclass(frozen=True)
class RewardBreakdown:
    r_c: float
    r_st: float
    r_dy: float
    r_t: float
    total: float
    n_col: int
    n_static: int
    d_lookahead_dyn: float = None  # min dynamic clearance over the horizon, if any


def min_separation(state: JointState) -> float:
    """Closest surface-to-surface distance from the robot to any human
    (negative when overlapping); inf with no humans."""
    rob = state.robot
    d = math.inf
    for h in state.humans:
        d = min(d, math.hypot(h.px - rob.px, h.py - rob.py) - rob.radius - h.radius)
    return d


def at_goal(state: JointState, cfg: RewardConfig) -> bool:
    rob = state.robot
    return math.hypot(rob.px - rob.gx, rob.py - rob.gy) < cfg.goal_tolerance


def current_reward(state: JointState, next_state: JointState, cfg: RewardConfig) -> float:
    """Collision / discomfort / goal / default branches, evaluated on the
    post-action state. Collision takes precedence over the goal."""
    d_t = min_separation(next_state)
    if d_t < 0:
        return -0.25
    if d_t < cfg.d_disc:
        return 0.25 * (-0.1 + d_t / 2.0)
    if at_goal(next_state, cfg):
        return 1.0
    return 0.0


def swept_collision(robot_pos, heading: float, speed: float, horizon: float,
                    human: ObservableState, robot_radius: float) -> bool:
    """True iff the human disc intersects the forward sweep of the robot disc
    along the segment [p, p + speed*horizon*(cos h, sin h)]."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    px, py = robot_pos
    ex = px + speed * horizon * math.cos(heading)
    ey = py + speed * horizon * math.sin(heading)
    d = _point_segment_dist(human.px, human.py, px, py, ex, ey)
    return d < robot_radius + human.radius


def _point_segment_dist(qx, qy, ax, ay, bx, by):
    abx, aby = bx - ax, by - ay
    ab_sq = abx * abx + aby * aby
    if ab_sq == 0.0:
        return math.hypot(qx - ax, qy - ay)
    t = ((qx - ax) * abx + (qy - ay) * aby) / ab_sq
    t = max(0.0, min(1.0, t))
    return math.hypot(qx - (ax + t * abx), qy - (ay + t * aby))


def lookahead_static(state: JointState, action: Action, static_ids,
                     cfg: RewardConfig):
    """-alpha * N_col / N_static over static humans inside the effective
    range; the sweep uses the post-rotation heading of the candidate action.
    Returns (reward, n_col, n_static)."""
    rob = state.robot
    heading = wrap_angle(rob.theta + action.dtheta)
    n_static = 0
    n_col = 0
    for i in static_ids:
        h = state.humans[i]
        if math.hypot(h.px - rob.px, h.py - rob.py) > cfg.r_e:
            continue
        n_static += 1
        if swept_collision(rob.position, heading, action.v, cfg.dt_static,
                           h, rob.radius):
            n_col += 1
    if n_static == 0:
        return 0.0, 0, 0
    return -cfg.alpha * n_col / n_static, n_col, n_static


def lookahead_dynamic(state: JointState, action: Action, dynamic_ids,
                      cfg: RewardConfig):
    """beta * min(0, d - d_disc) where d is the minimum clearance to any
    in-range dynamic human over the horizon, robot following the action and
    humans extrapolated at constant velocity. Returns (reward, d or None)."""
    rob = state.robot
    in_range = [state.humans[i] for i in dynamic_ids
                if math.hypot(state.humans[i].px - rob.px,
                              state.humans[i].py - rob.py) <= cfg.r_e]
    if not in_range:
        return 0.0, None
    heading = wrap_angle(rob.theta + action.dtheta)
    cx, cy = math.cos(heading), math.sin(heading)
    n_sub = max(1, int(round(cfg.dt_dynamic / cfg.lookahead_substep)))
    d_min = math.inf
    for k in range(n_sub + 1):
        t = cfg.dt_dynamic * k / n_sub
        rx = rob.px + action.v * t * cx
        ry = rob.py + action.v * t * cy
        for h in in_range:
            d = math.hypot(h.px + h.vx * t - rx, h.py + h.vy * t - ry) \
                - rob.radius - h.radius
            d_min = min(d_min, d)
    reward = cfg.beta * (d_min - cfg.d_disc)
    if cfg.clamp_dynamic:
        reward = min(0.0, reward)
    return reward, d_min


def time_reward(t: float, reached_goal: bool, cfg: RewardConfig) -> float:
    """-0.1 * t / t_limit on goal arrival; -0.2 on running out of time;
    0 for ordinary en-route steps."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if reached_goal:
        return -0.1 * t / cfg.t_limit
    if t >= cfg.t_limit:
        return -0.2
    return 0.0


def total_reward(state: JointState, next_state: JointState, action: Action,
                 t: float, cfg: RewardConfig, flags: AblationFlags,
                 static_ids=frozenset()) -> RewardBreakdown:
    """Full per-step reward with breakdown. `t` is the time after the
    transition; static_ids flags the scenario's static humans, everyone else
    is treated as dynamic."""
    r_c = current_reward(state, next_state, cfg)
    r_st, n_col, n_static = 0.0, 0, 0
    r_dy, d_dyn = 0.0, None
    if flags.lookahead:
        r_st, n_col, n_static = lookahead_static(state, action, static_ids, cfg)
        dynamic_ids = [i for i in range(len(state.humans)) if i not in static_ids]
        r_dy, d_dyn = lookahead_dynamic(state, action, dynamic_ids, cfg)
    r_t = time_reward(t, at_goal(next_state, cfg), cfg) if flags.time else 0.0
    return RewardBreakdown(r_c=r_c, r_st=r_st, r_dy=r_dy, r_t=r_t,
                           total=r_c + r_st + r_dy + r_t,
                           n_col=n_col, n_static=n_static,
                           d_lookahead_dyn=d_dyn)
