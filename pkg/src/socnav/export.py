"""On-disk episode formats shared by the pipeline and the plotting frontend.

Two containers carry the same episode object:

* batch records file: one JSON document per line, full-precision floats,
  bit-identical across runs with the same seed;
* single-episode trajectory file: line-oriented (header line, one line per
  step, footer line) with numbers rounded to 9 significant digits for
  human-diffable plotting input.
"""

import json
import math

from .domain import FullAgentState
from .simulation import EpisodeRecord, StepSnapshot

SCHEMA_EPISODE = "socnav-episode"
SCHEMA_TRAJECTORY = "socnav-trajectory"
SCHEMA_VERSION = 1

OUTCOMES = ("success", "collision", "timeout")


class ExportError(Exception):
    pass


def episode_to_obj(record: EpisodeRecord, *, configs_hash: str,
                   master_seed: int, episode_index: int, env_type: str,
                   d_disc: float, t_limit: float, dt: float) -> dict:
    """Self-contained episode document."""
    first = record.steps[0]
    static_flags = [i in record.static_ids for i in range(len(first.humans))]
    header = {
        "configs_hash": configs_hash,
        "master_seed": master_seed,
        "episode_index": episode_index,
        "env_type": env_type,
        "robot_radius": first.robot.radius,
        "human_radii": [h.radius for h in first.humans],
        "robot_goal": [first.robot.gx, first.robot.gy],
        "static_flags": static_flags,
        "d_disc": d_disc,
        "t_limit": t_limit,
        "dt": dt,
    }
    steps = []
    for snap in record.steps:
        steps.append({
            "t": snap.t,
            "robot": [snap.robot.px, snap.robot.py, snap.robot.theta,
                      snap.robot.vx, snap.robot.vy],
            "humans": [[h.px, h.py, h.vx, h.vy, int(flag)]
                       for h, flag in zip(snap.humans, static_flags)],
            "action": None if snap.action is None
                      else [snap.action.v, snap.action.dtheta],
            "reward": None if snap.reward is None else {
                "r_c": snap.reward.r_c, "r_st": snap.reward.r_st,
                "r_dy": snap.reward.r_dy, "r_t": snap.reward.r_t,
                "total": snap.reward.total, "n_col": snap.reward.n_col,
                "n_static": snap.reward.n_static,
                "d_lookahead_dyn": snap.reward.d_lookahead_dyn,
            },
        })
    footer = {"outcome": record.outcome, "nav_time": record.nav_time,
              "n_steps": record.n_steps,
              "discomfort_steps": record.discomfort_steps}
    return {"schema": SCHEMA_EPISODE, "version": SCHEMA_VERSION,
            "header": header, "steps": steps, "footer": footer}


def obj_to_record(obj: dict) -> EpisodeRecord:
    """Rebuild an EpisodeRecord from an episode document. Hidden agent fields
    not carried by the schema are filled with neutral values; everything the
    metrics need (positions, radii, outcomes, counts) round-trips."""
    header = obj["header"]
    static_flags = header["static_flags"]
    snaps = []
    from .domain import Action
    from .reward import RewardBreakdown
    for step in obj["steps"]:
        rx, ry, rtheta, rvx, rvy = step["robot"]
        robot = FullAgentState(rx, ry, rvx, rvy, header["robot_radius"],
                               header["robot_goal"][0], header["robot_goal"][1],
                               1.0, rtheta)
        humans = []
        for h, radius in zip(step["humans"], header["human_radii"]):
            hx, hy, hvx, hvy, _ = h
            humans.append(FullAgentState(hx, hy, hvx, hvy, radius,
                                         hx, hy, 0.0, 0.0))
        action = None if step["action"] is None else Action(*step["action"])
        reward = None if step["reward"] is None else RewardBreakdown(
            r_c=step["reward"]["r_c"], r_st=step["reward"]["r_st"],
            r_dy=step["reward"]["r_dy"], r_t=step["reward"]["r_t"],
            total=step["reward"]["total"], n_col=step["reward"]["n_col"],
            n_static=step["reward"]["n_static"],
            d_lookahead_dyn=step["reward"]["d_lookahead_dyn"])
        snaps.append(StepSnapshot(step["t"], robot, tuple(humans), action,
                                  reward))
    footer = obj["footer"]
    return EpisodeRecord(steps=tuple(snaps), outcome=footer["outcome"],
                         nav_time=footer["nav_time"],
                         discomfort_steps=footer["discomfort_steps"],
                         n_steps=footer["n_steps"],
                         static_ids=frozenset(
                             i for i, f in enumerate(static_flags) if f))


def write_records(path, objs):
    with open(path, "w") as f:
        for obj in objs:
            f.write(json.dumps(obj, sort_keys=True) + "\n")


def read_records(path):
    objs = []
    with open(path) as f:
        for line_no, line in enumerate(f):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"line {line_no}: not valid JSON ({exc})")
            objs.append(obj)
    return objs


def _round9(value):
    if isinstance(value, float):
        return float(f"{value:.9g}")
    if isinstance(value, list):
        return [_round9(v) for v in value]
    if isinstance(value, dict):
        return {k: _round9(v) for k, v in value.items()}
    return value


def write_trajectory(path, obj: dict):
    """Header line, one line per step, footer line; floats at 9 significant
    digits (idempotent: re-writing a parsed file is byte-identical)."""
    obj = _round9(obj)
    with open(path, "w") as f:
        f.write(json.dumps({"schema": SCHEMA_TRAJECTORY,
                            "version": obj.get("version", SCHEMA_VERSION),
                            "header": obj["header"]}, sort_keys=True) + "\n")
        for step in obj["steps"]:
            f.write(json.dumps({"step": step}, sort_keys=True) + "\n")
        f.write(json.dumps({"footer": obj["footer"]}, sort_keys=True) + "\n")


def read_trajectory(path) -> dict:
    header = None
    version = None
    steps = []
    footer = None
    with open(path) as f:
        for line_no, line in enumerate(f):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"line {line_no}: not valid JSON ({exc})")
            if line_no == 0:
                if doc.get("schema") != SCHEMA_TRAJECTORY:
                    raise ExportError("not a trajectory file")
                version = doc.get("version")
                header = doc.get("header")
            elif "step" in doc:
                steps.append(doc["step"])
            elif "footer" in doc:
                footer = doc["footer"]
            else:
                raise ExportError(f"line {line_no}: unrecognized document")
    if header is None:
        raise ExportError("missing header line")
    return {"schema": SCHEMA_EPISODE, "version": version, "header": header,
            "steps": steps, "footer": footer}


def _finite(x):
    return isinstance(x, (int, float)) and math.isfinite(x)


def validate(obj: dict) -> list:
    """All invariant violations in an episode/trajectory object; empty when
    well-formed. Each violation names the step index and field."""
    v = []
    if not isinstance(obj, dict):
        return ["document is not an object"]
    if obj.get("version") != SCHEMA_VERSION:
        v.append(f"unsupported schema version {obj.get('version')!r}, "
                 f"reader supports {SCHEMA_VERSION}")
        return v
    header = obj.get("header")
    steps = obj.get("steps")
    footer = obj.get("footer")
    if not isinstance(header, dict):
        v.append("missing header")
        return v
    if not steps:
        v.append("empty step array")
        return v
    if not isinstance(footer, dict):
        v.append("missing footer")
        return v

    n_humans = len(steps[0].get("humans", []))
    if len(header.get("human_radii", [])) != n_humans:
        v.append("header human_radii length does not match step 0 humans")
    if len(header.get("static_flags", [])) != n_humans:
        v.append("header static_flags length does not match step 0 humans")

    dt = None
    last = len(steps) - 1
    for i, step in enumerate(steps):
        t = step.get("t")
        if not _finite(t):
            v.append(f"step {i}: field t is not a finite number")
            continue
        if i > 0:
            prev_t = steps[i - 1].get("t")
            if _finite(prev_t):
                delta = t - prev_t
                if delta <= 0:
                    v.append(f"step {i}: field t does not increase")
                elif dt is None:
                    dt = delta
                elif abs(delta - dt) > 1e-6:
                    v.append(f"step {i}: field t spacing {delta} differs from {dt}")
        robot = step.get("robot")
        if not (isinstance(robot, list) and len(robot) == 5
                and all(_finite(x) for x in robot)):
            v.append(f"step {i}: field robot must be 5 finite numbers")
        humans = step.get("humans")
        if not isinstance(humans, list) or len(humans) != n_humans:
            v.append(f"step {i}: field humans length changed")
        else:
            for j, h in enumerate(humans):
                if not (isinstance(h, list) and len(h) == 5
                        and all(_finite(x) for x in h)):
                    v.append(f"step {i}: field humans[{j}] must be 5 finite numbers")
        action = step.get("action")
        if i == last:
            if action is not None:
                v.append(f"step {i}: field action must be null on the terminal step")
        elif not (isinstance(action, list) and len(action) == 2
                  and all(_finite(x) for x in action)):
            v.append(f"step {i}: field action must be 2 finite numbers")
        reward = step.get("reward")
        if i == 0:
            if reward is not None:
                v.append("step 0: field reward must be null on the initial step")
        elif not isinstance(reward, dict):
            v.append(f"step {i}: field reward missing")
        else:
            parts = [reward.get(k) for k in ("r_c", "r_st", "r_dy", "r_t", "total")]
            if not all(_finite(x) for x in parts):
                v.append(f"step {i}: field reward has non-finite parts")
            elif abs(sum(parts[:4]) - parts[4]) > 1e-8:  # 9-sig-digit text
                v.append(f"step {i}: field reward total does not equal the sum of parts")

    if footer.get("outcome") not in OUTCOMES:
        v.append(f"footer: outcome {footer.get('outcome')!r} unknown")
    if footer.get("n_steps") != len(steps) - 1:
        v.append("footer: n_steps does not match the step array")
    if not _finite(footer.get("nav_time")):
        v.append("footer: nav_time is not a finite number")
    return v
