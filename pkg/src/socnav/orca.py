"""Optimal reciprocal collision avoidance for the holonomic human crowd.

Each agent builds one half-plane velocity constraint per neighbor from the
truncated velocity-obstacle cone, then picks the feasible velocity closest to
its preferred velocity by a 2D linear program. When the constraints are
infeasible the fallback program minimizes the maximum constraint violation.
"""

import math
from dataclasses import dataclass

from .domain import FullAgentState, ObservableState

_EPS = 1e-10


@dataclass(frozen=True)
class HalfPlane:
    """Permitted velocity region {v : (v - point) . normal >= 0}."""

    point: tuple
    normal: tuple

    def __post_init__(self):
        n = math.hypot(*self.normal)
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"normal must be unit length, got |n| = {n}")

    @property
    def direction(self):
        # boundary line direction; permitted region lies to its left
        nx, ny = self.normal
        return (ny, -nx)


@dataclass(frozen=True)
class OrcaConfig:
    tau: float = 5.0
    dt: float = 0.25
    neighbor_dist: float = 10.0
    max_neighbors: int = 10
    safety_margin: float = 0.01
    robot_visible: bool = True

    def __post_init__(self):
        if self.tau <= 0 or self.neighbor_dist <= 0:
            raise ValueError("tau and neighbor_dist must be positive")


def _det(ax, ay, bx, by):
    return ax * by - ay * bx


def _avoidance_shift(self_state, other, cfg):
    """Smallest change u from the relative velocity to the boundary of the
    velocity obstacle induced by `other` (truncated at horizon tau; when the
    discs already overlap, the collision is resolved within dt instead)."""
    rx = other.px - self_state.px
    ry = other.py - self_state.py
    vx = self_state.vx - other.vx
    vy = self_state.vy - other.vy
    dist_sq = rx * rx + ry * ry
    comb_r = self_state.radius + other.radius + cfg.safety_margin
    comb_r_sq = comb_r * comb_r

    if dist_sq > comb_r_sq:
        inv_tau = 1.0 / cfg.tau
        # w: vector from the cone cutoff center to the relative velocity
        wx = vx - rx * inv_tau
        wy = vy - ry * inv_tau
        w_len_sq = wx * wx + wy * wy
        dot1 = wx * rx + wy * ry
        if dot1 < 0.0 and dot1 * dot1 > comb_r_sq * w_len_sq:
            # project on the cutoff circle
            w_len = math.sqrt(w_len_sq)
            uwx, uwy = _tie_break(wx / w_len, wy / w_len, rx, ry, vx, vy)
            ux = (comb_r * inv_tau - w_len) * uwx
            uy = (comb_r * inv_tau - w_len) * uwy
            return ux, uy, (uwx, uwy)
        # project on the nearer cone leg; exact cone-axis ties go left
        leg = math.sqrt(dist_sq - comb_r_sq)
        if _det(rx, ry, wx, wy) >= 0.0:
            dx = (rx * leg - ry * comb_r) / dist_sq
            dy = (rx * comb_r + ry * leg) / dist_sq
        else:
            dx = -(rx * leg + ry * comb_r) / dist_sq
            dy = -(-rx * comb_r + ry * leg) / dist_sq
        dot2 = vx * dx + vy * dy
        ux = dot2 * dx - vx
        uy = dot2 * dy - vy
        return ux, uy, (-dy, dx)

    # already overlapping: resolve the collision within dt
    inv_dt = 1.0 / cfg.dt
    wx = vx - rx * inv_dt
    wy = vy - ry * inv_dt
    w_len = math.hypot(wx, wy)
    if w_len > _EPS:
        uwx, uwy = _tie_break(wx / w_len, wy / w_len, rx, ry, vx, vy)
    else:
        # degenerate: push straight apart (fixed direction if coincident)
        d = math.sqrt(dist_sq)
        uwx, uwy = (-rx / d, -ry / d) if d > _EPS else (1.0, 0.0)
    ux = (comb_r * inv_dt - w_len) * uwx
    uy = (comb_r * inv_dt - w_len) * uwy
    return ux, uy, (uwx, uwy)


_TIE_TILT_COS = math.cos(0.1)
_TIE_TILT_SIN = math.sin(0.1)


def _tie_break(uwx, uwy, rx, ry, vx, vy):
    """Closing head-on encounters can leave the relative velocity exactly on
    the cone axis, a symmetric standoff that would never resolve; rotate the
    projection direction slightly counterclockwise. Applying the same
    rotation on both sides keeps the avoidance reciprocal. Non-closing pairs
    (e.g. two stationary agents) keep the exact axis-aligned projection."""
    det = rx * uwy - ry * uwx
    closing = rx * vx + ry * vy > 0.0  # rel_vel is v_self - v_other
    if abs(det) > 1e-12 * math.hypot(rx, ry) or not closing:
        return uwx, uwy
    return (_TIE_TILT_COS * uwx - _TIE_TILT_SIN * uwy,
            _TIE_TILT_SIN * uwx + _TIE_TILT_COS * uwy)


def orca_halfplanes(self_state: FullAgentState, neighbors, cfg: OrcaConfig):
    """One half-plane per considered neighbor (nearest max_neighbors within
    neighbor_dist). The agent takes half the avoidance responsibility."""
    ranked = []
    for i, other in enumerate(neighbors):
        d = math.hypot(other.px - self_state.px, other.py - self_state.py)
        if d < cfg.neighbor_dist:
            ranked.append((d, i, other))
    ranked.sort(key=lambda t: (t[0], t[1]))
    planes = []
    for _, _, other in ranked[:cfg.max_neighbors]:
        ux, uy, boundary_normal = _avoidance_shift(self_state, other, cfg)
        point = (self_state.vx + 0.5 * ux, self_state.vy + 0.5 * uy)
        planes.append(HalfPlane(point, boundary_normal))
    return planes


def _lp1(lines, line_no, radius, opt_x, opt_y, direction_opt, rx, ry):
    """Optimize along the boundary line `line_no` subject to lines < line_no
    and the speed disc. Returns (ok, x, y)."""
    px, py = lines[line_no][0]
    dx, dy = lines[line_no][1]
    dot_product = px * dx + py * dy
    discriminant = dot_product * dot_product + radius * radius - (px * px + py * py)
    if discriminant < 0.0:
        return False, rx, ry
    sqrt_disc = math.sqrt(discriminant)
    t_left = -dot_product - sqrt_disc
    t_right = -dot_product + sqrt_disc

    for i in range(line_no):
        qx, qy = lines[i][0]
        ex, ey = lines[i][1]
        denominator = _det(dx, dy, ex, ey)
        numerator = _det(ex, ey, px - qx, py - qy)
        if abs(denominator) <= _EPS:
            if numerator < 0.0:
                return False, rx, ry
            continue
        t = numerator / denominator
        if denominator >= 0.0:
            t_right = min(t_right, t)
        else:
            t_left = max(t_left, t)
        if t_left > t_right:
            return False, rx, ry

    if direction_opt:
        if opt_x * dx + opt_y * dy > 0.0:
            t = t_right
        else:
            t = t_left
    else:
        t = dx * (opt_x - px) + dy * (opt_y - py)
        t = max(t_left, min(t_right, t))
    return True, px + t * dx, py + t * dy


def _lp2(lines, radius, opt_x, opt_y, direction_opt):
    """Velocity in all half-planes and the speed disc closest to the optimum.
    Returns (count, x, y); count < len(lines) flags the first failing line."""
    if direction_opt:
        rx, ry = opt_x * radius, opt_y * radius
    elif opt_x * opt_x + opt_y * opt_y > radius * radius:
        n = math.hypot(opt_x, opt_y)
        rx, ry = opt_x / n * radius, opt_y / n * radius
    else:
        rx, ry = opt_x, opt_y

    for i, ((px, py), (dx, dy)) in enumerate(lines):
        if _det(dx, dy, px - rx, py - ry) > 0.0:
            ok, nx, ny = _lp1(lines, i, radius, opt_x, opt_y, direction_opt, rx, ry)
            if not ok:
                return i, rx, ry
            rx, ry = nx, ny
    return len(lines), rx, ry


def _lp3(lines, begin_line, radius, rx, ry):
    """Infeasible fallback: minimize the maximum constraint violation."""
    distance = 0.0
    for i in range(begin_line, len(lines)):
        (px, py), (dx, dy) = lines[i]
        if _det(dx, dy, px - rx, py - ry) > distance:
            proj = []
            for j in range(i):
                (qx, qy), (ex, ey) = lines[j]
                determinant = _det(dx, dy, ex, ey)
                if abs(determinant) <= _EPS:
                    if dx * ex + dy * ey > 0.0:
                        continue  # parallel, same direction: j dominates i
                    npx, npy = 0.5 * (px + qx), 0.5 * (py + qy)
                else:
                    s = _det(ex, ey, px - qx, py - qy) / determinant
                    npx, npy = px + s * dx, py + s * dy
                ndx, ndy = ex - dx, ey - dy
                n = math.hypot(ndx, ndy)
                proj.append(((npx, npy), (ndx / n, ndy / n)))
            count, nx, ny = _lp2(proj, radius, -dy, dx, True)
            if count >= len(proj):
                # deepest-violation direction; keep previous point on failure
                rx, ry = nx, ny
            distance = _det(dx, dy, px - rx, py - ry)
    return rx, ry


def solve_velocity(halfplanes, pref_vel, max_speed: float):
    """Feasible velocity closest to pref_vel inside all half-planes and the
    speed disc; falls back to minimizing the maximum violation when the
    constraints are infeasible. Output speed never exceeds max_speed."""
    if max_speed <= 0:
        raise ValueError("max_speed must be positive")
    lines = [(hp.point, hp.direction) for hp in halfplanes]
    count, rx, ry = _lp2(lines, max_speed, pref_vel[0], pref_vel[1], False)
    if count < len(lines):
        rx, ry = _lp3(lines, count, max_speed, rx, ry)
    return rx, ry


def preferred_velocity(agent: FullAgentState, dt: float):
    """Goal-directed preferred velocity, capped so the goal is not overshot."""
    dx = agent.gx - agent.px
    dy = agent.gy - agent.py
    dist = math.hypot(dx, dy)
    if dist < _EPS or agent.v_pref == 0.0:
        return (0.0, 0.0)
    speed = min(agent.v_pref, dist / dt)
    return (dx / dist * speed, dy / dist * speed)


def crowd_step(humans, cfg: OrcaConfig, robot: FullAgentState = None):
    """New velocity for every human, all computed from the same pre-step
    snapshot (Jacobi update). Static humans (v_pref = 0) always receive
    (0, 0). Humans at their goals prefer (0, 0), which the solver grants them
    whenever holding still is collision-free, so they park there while
    staying inside the reciprocal guarantee. The robot, when visible, enters
    every human's neighbor list but is not controlled here."""
    velocities = []
    for i, h in enumerate(humans):
        if h.v_pref == 0.0:
            velocities.append((0.0, 0.0))
            continue
        neighbors = [o.observable() for j, o in enumerate(humans) if j != i]
        if robot is not None and cfg.robot_visible:
            neighbors.append(robot.observable())
        planes = orca_halfplanes(h, neighbors, cfg)
        pref = preferred_velocity(h, cfg.dt)
        velocities.append(solve_velocity(planes, pref, h.v_pref))
    return velocities
