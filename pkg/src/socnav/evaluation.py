"""Seeded batch evaluation and the five navigation metrics."""

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .reward import min_separation
from .domain import JointState
from .simulation import (STREAM_EVAL, EpisodeRecord, episode_rng,
                         generate_scenario, run_episode)


@dataclass(frozen=True)
class MetricsReport:
    success_rate: float
    collision_rate: float
    timeout_rate: float
    nav_time: float          # mean over successful episodes; None if none
    disc_rate: float         # percent of steps closer than the comfort distance
    n_episodes: int

    def to_dict(self):
        return {"success_rate": self.success_rate,
                "collision_rate": self.collision_rate,
                "timeout_rate": self.timeout_rate,
                "nav_time": self.nav_time,
                "disc_rate": self.disc_rate,
                "n_episodes": self.n_episodes}

    def format_table(self, label="policy"):
        rows = format_metrics_rows([(label, self)])
        return rows


def format_metrics_rows(entries) -> str:
    """Aligned report table, one row per (label, MetricsReport)."""
    header = ["Method", "Succ.", "Coll.", "Time Out", "Nav. Time", "Disc. Rate"]
    lines = ["  ".join(f"{h:>10}" for h in header)]
    for label, rep in entries:
        nav = f"{rep.nav_time:.2f}" if rep.nav_time is not None else "-"
        cells = [label, f"{rep.success_rate:.2f}", f"{rep.collision_rate:.2f}",
                 f"{rep.timeout_rate:.2f}", nav, f"{rep.disc_rate:.2f}"]
        lines.append("  ".join(f"{c:>10}" for c in cells))
    return "\n".join(lines)


def _discomfort_count(record: EpisodeRecord, d_disc: float) -> int:
    """Pre-terminal transitions whose arrival state has 0 <= d_t < d_disc."""
    count = 0
    for snap in record.steps[1:-1]:
        joint = JointState(snap.robot, tuple(h.observable() for h in snap.humans))
        d = min_separation(joint)
        if 0 <= d < d_disc:
            count += 1
    return count


def compute_metrics(records, d_disc: float) -> MetricsReport:
    """Outcome fractions, mean success navigation time, and the discomfort
    step percentage aggregated over all episodes."""
    if not records:
        raise ValueError("cannot compute metrics over zero episodes")
    n = len(records)
    n_success = sum(1 for r in records if r.outcome == "success")
    n_collision = sum(1 for r in records if r.outcome == "collision")
    n_timeout = n - n_success - n_collision
    nav_times = [r.nav_time for r in records if r.outcome == "success"]
    nav_time = sum(nav_times) / len(nav_times) if nav_times else None
    total_steps = sum(r.n_steps for r in records)
    discomfort = sum(_discomfort_count(r, d_disc) for r in records)
    return MetricsReport(success_rate=n_success / n,
                         collision_rate=n_collision / n,
                         timeout_rate=n_timeout / n,
                         nav_time=nav_time,
                         disc_rate=100.0 * discomfort / total_steps,
                         n_episodes=n)


def _run_indices(args):
    (policy, indices, master_seed, scenario_cfg, reward_cfg, step_cfg,
     orca_cfg, flags) = args
    out = []
    for i in indices:
        rng = episode_rng(master_seed, i, STREAM_EVAL)
        scenario = generate_scenario(scenario_cfg, rng)
        if hasattr(policy, "static_ids"):
            ep_policy = dataclasses.replace(policy,
                                            static_ids=scenario.static_ids)
        else:
            ep_policy = policy
        record = run_episode(ep_policy, scenario, reward_cfg, step_cfg,
                             orca_cfg, flags)
        out.append((i, record))
    return out


def run_evaluation(policy, n_episodes: int, master_seed: int, *, scenario_cfg,
                   reward_cfg, step_cfg, orca_cfg, flags, workers: int = 1):
    """Greedy evaluation over a reproducible scenario sequence: episode i is
    generated from the stream (master_seed, eval, i), so two policies under
    the same master seed face identical scenarios. Returns (report, records)
    with records in episode order regardless of worker count."""
    indices = list(range(n_episodes))
    args = (policy, indices, master_seed, scenario_cfg, reward_cfg, step_cfg,
            orca_cfg, flags)
    if workers <= 1 or n_episodes <= 1:
        tagged = _run_indices(args)
    else:
        chunks = [indices[k::workers] for k in range(workers)]
        tagged = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            jobs = [pool.submit(_run_indices,
                                (policy, chunk, master_seed, scenario_cfg,
                                 reward_cfg, step_cfg, orca_cfg, flags))
                    for chunk in chunks if chunk]
            for job in jobs:
                tagged.extend(job.result())
    tagged.sort(key=lambda pair: pair[0])
    records = [rec for _, rec in tagged]
    report = compute_metrics(records, reward_cfg.d_disc)
    return report, records
