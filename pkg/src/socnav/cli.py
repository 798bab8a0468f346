"""Command-line entry point: train, eval, export, demo.

All randomness flows from the manifest's master seed; every command is
deterministic given (config, seed).
"""

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import __version__
from .configfile import ConfigError, WorkbenchConfig, load_config
from .domain import build_action_space
from .evaluation import format_metrics_rows, run_evaluation
from .export import (ExportError, episode_to_obj, read_records, validate,
                     write_records, write_trajectory)
from .policies import OrcaPolicy, StraightPolicy, ValueNetPolicy
from .reward import AblationFlags
from .simulation import (STREAM_DEMO, STREAM_RL, episode_rng,
                         generate_scenario, run_episode)
from .training import (DiscountRule, TrainingDiverged, collect_demonstrations,
                       imitation_fit, rl_train, save_demos)
from .valuenet import (CheckpointDimensionError, CheckpointError, init_params,
                       load_checkpoint, save_checkpoint)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DIVERGED = 4

# rng stream tags for the non-episode draws
_STREAM_INIT = 10
_STREAM_IL = 11
_STREAM_RL_MASTER = 12


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _rng(seed, stream):
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(stream))))


def write_manifest(out_dir, cfg: WorkbenchConfig, command: str, outputs: dict):
    manifest = {
        "artifact": "socnav",
        "artifact_version": __version__,
        "command": command,
        "config_hash": cfg.hash,
        "master_seed": cfg.seed,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": outputs,
    }
    path = os.path.join(out_dir, "manifest.json")
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)
    return path


def _wiring(cfg: WorkbenchConfig):
    actions = build_action_space(cfg.scenario.v_pref, cfg.actions.n_headings,
                                 cfg.actions.dtheta_max)
    rule = DiscountRule(cfg.train.gamma, cfg.scenario.v_pref, cfg.step.dt)
    flags = AblationFlags.from_name(cfg.ablation)
    return actions, rule, flags


def _collect_demo_dataset(cfg, actions, rule, flags, n_episodes):
    expert = OrcaPolicy(actions, cfg.orca, cfg.step)

    def scenario_gen(i):
        return generate_scenario(cfg.scenario,
                                 episode_rng(cfg.seed, i, STREAM_DEMO))

    def run_one(scenario):
        return run_episode(expert, scenario, cfg.reward, cfg.step, cfg.orca,
                           flags)

    return collect_demonstrations(n_episodes, scenario_gen, run_one, rule,
                                  cfg.network.map_config)


def cmd_train(cfg: WorkbenchConfig, out_dir: str) -> int:
    os.makedirs(out_dir, exist_ok=True)
    ckpt_path = os.path.join(out_dir, "checkpoint.ckpt")
    ckpt_il_path = os.path.join(out_dir, "checkpoint_il.ckpt")
    log_path = os.path.join(out_dir, "train_log.jsonl")
    write_manifest(out_dir, cfg, "train",
                   {"checkpoint": ckpt_path, "checkpoint_il": ckpt_il_path,
                    "train_log": log_path})
    actions, rule, flags = _wiring(cfg)

    params = init_params(cfg.network, _rng(cfg.seed, _STREAM_INIT))
    dataset = _collect_demo_dataset(cfg, actions, rule, flags,
                                    cfg.train.il_episodes)
    params, il_losses = imitation_fit(params, dataset, cfg.train,
                                      _rng(cfg.seed, _STREAM_IL))
    save_checkpoint(params, ckpt_il_path)

    def scenario_gen(i):
        return generate_scenario(cfg.scenario,
                                 episode_rng(cfg.seed, i, STREAM_RL))

    def run_one(scenario, live_params, eps, rng):
        policy = ValueNetPolicy(live_params, actions, cfg.reward, rule,
                                flags=flags, static_ids=scenario.static_ids,
                                epsilon=eps, rng=rng)
        return run_episode(policy, scenario, cfg.reward, cfg.step, cfg.orca,
                           flags)

    params, rl_log = rl_train(params, cfg.train, scenario_gen, run_one,
                              cfg.reward, rule,
                              _rng(cfg.seed, _STREAM_RL_MASTER))
    save_checkpoint(params, ckpt_path)
    with open(log_path, "w") as f:
        for epoch, loss in enumerate(il_losses):
            f.write(json.dumps({"stage": "il", "epoch": epoch, "loss": loss},
                               sort_keys=True) + "\n")
        for line in rl_log:
            f.write(json.dumps({"stage": "rl", **line}, sort_keys=True) + "\n")
    print(f"training complete: {ckpt_path}")
    return EXIT_OK


def _build_policy(kind, cfg, actions, rule, flags, checkpoint):
    if kind == "net":
        if checkpoint is None:
            raise CliError("--policy net requires --checkpoint", EXIT_CONFIG)
        try:
            params = load_checkpoint(checkpoint, expect_config=cfg.network)
        except FileNotFoundError as exc:
            raise CliError(f"cannot read checkpoint: {exc}", EXIT_IO)
        except CheckpointDimensionError as exc:
            raise CliError(f"checkpoint does not fit the config: {exc}",
                           EXIT_CONFIG)
        except CheckpointError as exc:
            raise CliError(f"bad checkpoint: {exc}", EXIT_IO)
        return ValueNetPolicy(params, actions, cfg.reward, rule, flags=flags)
    if kind == "orca":
        return OrcaPolicy(actions, cfg.orca, cfg.step)
    if kind == "straight":
        return StraightPolicy(actions)
    raise CliError(f"unknown policy '{kind}'", EXIT_CONFIG)


def cmd_eval(cfg: WorkbenchConfig, out_dir: str, checkpoint, n_episodes: int,
             policy_kind: str, workers: int) -> int:
    os.makedirs(out_dir, exist_ok=True)
    records_path = os.path.join(out_dir, "records.jsonl")
    report_txt = os.path.join(out_dir, "report.txt")
    report_json = os.path.join(out_dir, "report.json")
    write_manifest(out_dir, cfg, "eval",
                   {"records": records_path, "report_txt": report_txt,
                    "report_json": report_json})
    actions, rule, flags = _wiring(cfg)
    policy = _build_policy(policy_kind, cfg, actions, rule, flags, checkpoint)
    report, records = run_evaluation(policy, n_episodes, cfg.seed,
                                     scenario_cfg=cfg.scenario,
                                     reward_cfg=cfg.reward, step_cfg=cfg.step,
                                     orca_cfg=cfg.orca, flags=flags,
                                     workers=workers)
    objs = [episode_to_obj(rec, configs_hash=cfg.hash, master_seed=cfg.seed,
                           episode_index=i, env_type=cfg.scenario.env_type,
                           d_disc=cfg.reward.d_disc,
                           t_limit=cfg.reward.t_limit, dt=cfg.step.dt)
            for i, rec in enumerate(records)]
    write_records(records_path, objs)
    table = format_metrics_rows([(policy_kind, report)])
    with open(report_txt, "w") as f:
        f.write(table + "\n")
    with open(report_json, "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    print(table)
    return EXIT_OK


def cmd_demo(cfg: WorkbenchConfig, out_dir: str, n_episodes: int) -> int:
    os.makedirs(out_dir, exist_ok=True)
    demos_path = os.path.join(out_dir, "demos.bin")
    write_manifest(out_dir, cfg, "demo", {"demos": demos_path})
    actions, rule, flags = _wiring(cfg)
    dataset = _collect_demo_dataset(cfg, actions, rule, flags, n_episodes)
    save_demos(dataset, demos_path)
    print(f"collected {len(dataset)} experiences from {n_episodes} episodes "
          f"-> {demos_path}")
    return EXIT_OK


def cmd_export(records_path: str, index: int, out_path: str) -> int:
    try:
        objs = read_records(records_path)
    except OSError as exc:
        raise CliError(f"cannot read records: {exc}", EXIT_IO)
    except ExportError as exc:
        raise CliError(f"records file is malformed: {exc}", EXIT_IO)
    if not 0 <= index < len(objs):
        raise CliError(
            f"episode index {index} out of range (file has {len(objs)})",
            EXIT_CONFIG)
    obj = objs[index]
    problems = validate(obj)
    if problems:
        raise CliError("record fails validation: " + "; ".join(problems),
                       EXIT_IO)
    write_trajectory(out_path, obj)
    print(f"wrote {out_path}")
    return EXIT_OK


def _add_common(p):
    p.add_argument("--config", help="YAML config document")
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--env", choices=["separated", "two_barriers", "concave",
                                     "none"],
                   help="static-obstacle environment override")
    p.add_argument("--ablation", choices=["full", "rc_only", "rc_rl", "rc_rt"],
                   help="reward-term selection override")
    p.add_argument("--out", required=True, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="socnav", description="crowd navigation workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="imitation stage then value learning")
    _add_common(p)

    p = sub.add_parser("eval", help="seeded batch evaluation")
    _add_common(p)
    p.add_argument("--checkpoint", help="value-network checkpoint")
    p.add_argument("--episodes", type=int, default=500)
    p.add_argument("--policy", choices=["net", "orca", "straight"],
                   default="net")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)

    p = sub.add_parser("demo", help="collect expert demonstrations only")
    _add_common(p)
    p.add_argument("--episodes", type=int, default=100)

    p = sub.add_parser("export", help="extract one episode as a trajectory file")
    p.add_argument("--records", required=True)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--out", required=True)
    return parser


def _config_from_args(args) -> WorkbenchConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "env", None):
        overrides["scenario.env_type"] = args.env
    if getattr(args, "ablation", None):
        overrides["ablation"] = args.ablation
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export":
            return cmd_export(args.records, args.index, args.out)
        cfg = _config_from_args(args)
        if args.command == "train":
            return cmd_train(cfg, args.out)
        if args.command == "eval":
            return cmd_eval(cfg, args.out, args.checkpoint, args.episodes,
                            args.policy, args.workers)
        if args.command == "demo":
            return cmd_demo(cfg, args.out, args.episodes)
        raise CliError(f"unknown command {args.command}", EXIT_CONFIG)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
