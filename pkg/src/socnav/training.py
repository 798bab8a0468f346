"""Two-stage training: imitation bootstrap from reciprocal-avoidance
demonstrations, then epsilon-greedy value learning with replay and a frozen
target network. Also home of the one-step-lookahead action selector."""

import json
import math
from dataclasses import dataclass

import numpy as np

from .domain import (Action, JointState, ObservableState, RotatedState,
                     rotate_to_robot_frame)
from .kinematics import StepConfig, propagate_robot
from .reward import AblationFlags, RewardConfig, total_reward
from .valuenet import ValueNetParams, build_local_maps, forward, gradient


class TrainingDiverged(Exception):
    pass


@dataclass(frozen=True)
class TrainConfig:
    il_episodes: int = 3000
    il_epochs: int = 50
    il_lr: float = 0.01
    rl_episodes: int = 10_000
    rl_lr: float = 0.0001
    gamma: float = 0.9
    eps_start: float = 0.5
    eps_end: float = 0.1
    eps_decay_episodes: int = 4000
    replay_capacity: int = 100_000
    batch_size: int = 100
    updates_per_episode: int = 10
    target_sync_episodes: int = 50
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not self.eps_start >= self.eps_end >= 0.0:
            raise ValueError("need eps_start >= eps_end >= 0")


@dataclass(frozen=True)
class DiscountRule:
    """Per-step discount gamma^(dt * v_pref), normalized by preferred speed."""

    gamma: float
    v_pref: float
    dt: float

    @property
    def step_factor(self) -> float:
        f = self.gamma ** (self.dt * self.v_pref)
        if not 0.0 < f < 1.0:
            raise ValueError(f"per-step discount {f} outside (0, 1)")
        return f


@dataclass(frozen=True)
class Experience:
    rotated: object       # RotatedState
    maps: np.ndarray
    target: float

    def __post_init__(self):
        if not math.isfinite(self.target):
            raise ValueError("experience target must be finite")


class ReplayBuffer:
    """Fixed-capacity ring: at capacity, the oldest experience is evicted."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._data = []
        self._pos = 0

    def __len__(self):
        return len(self._data)

    def push(self, exp: Experience):
        if len(self._data) < self.capacity:
            self._data.append(exp)
        else:
            self._data[self._pos] = exp
            self._pos = (self._pos + 1) % self.capacity

    def sample(self, rng: np.random.Generator, batch_size: int):
        idx = rng.choice(len(self._data), size=min(batch_size, len(self._data)),
                         replace=False)
        return [self._data[i] for i in idx]


class Adam:
    """Adaptive-moment estimation over a parameter snapshot; step() returns a
    new snapshot and never mutates the input arrays."""

    def __init__(self, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = None
        self._v = None

    def step(self, params: ValueNetParams, grads: ValueNetParams) -> ValueNetParams:
        flat_g = [a for _, _, w, b in grads.layers() for a in (w, b)]
        if self._m is None:
            self._m = [np.zeros_like(g) for g in flat_g]
            self._v = [np.zeros_like(g) for g in flat_g]
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        flat_p = [a for _, _, w, b in params.layers() for a in (w, b)]
        new_flat = []
        for i, (p, g) in enumerate(zip(flat_p, flat_g)):
            self._m[i] = self.beta1 * self._m[i] + (1 - self.beta1) * g
            self._v[i] = self.beta2 * self._v[i] + (1 - self.beta2) * g * g
            m_hat = self._m[i] / bc1
            v_hat = self._v[i] / bc2
            new_flat.append(p - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
        it = iter(new_flat)
        rebuild = {"embed": [], "attn": [], "head": []}
        for name, _, w, b in params.layers():
            rebuild[name].append((next(it), next(it)))
        return ValueNetParams(params.config, tuple(rebuild["embed"]),
                              tuple(rebuild["attn"]), tuple(rebuild["head"]))


def epsilon_at(episode: int, cfg: TrainConfig) -> float:
    """Linear decay from eps_start to eps_end over eps_decay_episodes, then
    constant at the floor."""
    if episode < 0:
        raise ValueError("episode must be non-negative")
    if episode >= cfg.eps_decay_episodes:
        return cfg.eps_end
    frac = episode / cfg.eps_decay_episodes
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac


def td_target(reward: float, next_value: float, terminal: bool,
              rule: DiscountRule) -> float:
    return reward if terminal else reward + rule.step_factor * next_value


def state_features(state: JointState, map_cfg):
    rotated = rotate_to_robot_frame(state)
    maps = build_local_maps(state, map_cfg)
    return rotated, maps


def select_action(params: ValueNetParams, state: JointState, actions,
                  epsilon: float, reward_cfg: RewardConfig, rule: DiscountRule,
                  rng: np.random.Generator = None, *,
                  flags: AblationFlags = AblationFlags(),
                  static_ids=frozenset(), t: float = 0.0) -> Action:
    """Epsilon-greedy over R(s, a) + gamma^(dt*v_pref) * V(s'); humans are
    extrapolated at constant velocity over dt for the imagined transition.
    Ties break toward the lowest action index."""
    if not actions:
        raise ValueError("action list must be non-empty")
    if epsilon > 0 and rng.random() < epsilon:
        return actions[rng.integers(len(actions))]
    step_cfg = StepConfig(rule.dt)
    map_cfg = params.config.map_config
    best, best_score = None, -math.inf
    for a in actions:
        next_robot = propagate_robot(state.robot, a, step_cfg)
        next_humans = tuple(
            ObservableState(h.px + h.vx * rule.dt, h.py + h.vy * rule.dt,
                            h.vx, h.vy, h.radius)
            for h in state.humans)
        next_joint = JointState(next_robot, next_humans)
        breakdown = total_reward(state, next_joint, a, t + rule.dt,
                                 reward_cfg, flags, static_ids)
        value, _ = forward(params, *state_features(next_joint, map_cfg))
        score = breakdown.total + rule.step_factor * value
        if score > best_score:
            best, best_score = a, score
    return best


def episode_returns(record, rule: DiscountRule):
    """Discounted cumulative reward target for every visited state: backward
    recursion G_j = r_j + disc * G_{j+1}, the terminal state valued at its own
    arrival reward."""
    rewards = [0.0] + [s.reward.total for s in record.steps[1:]]
    g = 0.0
    out = [0.0] * len(rewards)
    for j in range(len(rewards) - 1, -1, -1):
        if j == len(rewards) - 1:
            g = rewards[j]
        else:
            g = rewards[j] + rule.step_factor * g
        out[j] = g
    return out


def experiences_from_returns(record, rule: DiscountRule, map_cfg):
    """Monte-Carlo imitation experiences, one per visited state."""
    targets = episode_returns(record, rule)
    out = []
    for snap, target in zip(record.steps, targets):
        joint = JointState(snap.robot, tuple(h.observable() for h in snap.humans))
        rotated, maps = state_features(joint, map_cfg)
        out.append(Experience(rotated, maps, target))
    return out


def collect_demonstrations(n: int, scenario_gen, run_one, rule: DiscountRule,
                           map_cfg) -> list:
    """n demonstration episodes from the scripted expert; every visited state
    becomes an experience targeted at its discounted episode return. Failed
    episodes are retained with their negative outcomes.

    scenario_gen(i) builds the i-th scenario; run_one(scenario) rolls it out
    with the expert policy and returns the EpisodeRecord.
    """
    dataset = []
    for i in range(n):
        record = run_one(scenario_gen(i))
        dataset.extend(experiences_from_returns(record, rule, map_cfg))
    return dataset


def _batch_gradients(params, batch):
    """Mean gradient and mean squared error over a batch of experiences."""
    acc = None
    loss = 0.0
    for exp in batch:
        grads, value = gradient(params, exp.rotated, exp.maps, exp.target)
        loss += (value - exp.target) ** 2
        if acc is None:
            acc = [a for _, _, w, b in grads.layers() for a in (w, b)]
        else:
            for slot, arr in zip(acc,
                                 (a for _, _, w, b in grads.layers()
                                  for a in (w, b))):
                slot += arr
    scale = 1.0 / len(batch)
    acc = [a * scale for a in acc]
    it = iter(acc)
    rebuild = {"embed": [], "attn": [], "head": []}
    for name, _, w, b in params.layers():
        rebuild[name].append((next(it), next(it)))
    mean_grads = ValueNetParams(params.config, tuple(rebuild["embed"]),
                                tuple(rebuild["attn"]), tuple(rebuild["head"]))
    return mean_grads, loss * scale


def imitation_fit(params: ValueNetParams, dataset, cfg: TrainConfig,
                  rng: np.random.Generator):
    """Regress the value net onto the demonstration targets: Adam, MSE,
    il_epochs passes over shuffled mini-batches. Returns (params, epoch_losses).
    """
    if not dataset:
        raise ValueError("demonstration dataset is empty")
    adam = Adam(cfg.il_lr)
    losses = []
    n = len(dataset)
    for _ in range(cfg.il_epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, cfg.batch_size):
            batch = [dataset[i] for i in order[start:start + cfg.batch_size]]
            grads, loss = _batch_gradients(params, batch)
            if not math.isfinite(loss):
                raise TrainingDiverged(f"imitation loss became {loss}")
            params = adam.step(params, grads)
            epoch_loss += loss
            n_batches += 1
        losses.append(epoch_loss / n_batches)
    return params, losses


def rl_train(params: ValueNetParams, cfg: TrainConfig, scenario_gen, run_one,
             reward_cfg: RewardConfig, rule: DiscountRule,
             rng: np.random.Generator):
    """Epsilon-greedy value learning: roll out, push one-step bootstrapped
    targets from the frozen target network into the replay ring, then take
    batch gradient steps after every episode. Returns (params, log_lines).

    scenario_gen(i) builds the i-th scenario; run_one(scenario, policy_args)
    rolls it out and returns the EpisodeRecord.
    """
    adam = Adam(cfg.rl_lr)
    replay = ReplayBuffer(cfg.replay_capacity)
    target_params = params
    map_cfg = params.config.map_config
    log = []
    for episode in range(cfg.rl_episodes):
        if cfg.target_sync_episodes > 0 and episode % cfg.target_sync_episodes == 0:
            target_params = params
        eps = epsilon_at(episode, cfg)
        record = run_one(scenario_gen(episode), params, eps, rng)

        features = []
        for snap in record.steps:
            joint = JointState(snap.robot,
                               tuple(h.observable() for h in snap.humans))
            features.append(state_features(joint, map_cfg))
        n_trans = record.n_steps
        for i in range(n_trans):
            r = record.steps[i + 1].reward.total
            terminal = (i + 1 == n_trans)
            if terminal:
                target = td_target(r, 0.0, True, rule)
            else:
                next_value, _ = forward(target_params, *features[i + 1])
                target = td_target(r, next_value, False, rule)
            replay.push(Experience(*features[i], target))

        losses = []
        for _ in range(cfg.updates_per_episode):
            if len(replay) < cfg.batch_size:
                break
            batch = replay.sample(rng, cfg.batch_size)
            grads, loss = _batch_gradients(params, batch)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"TD loss became {loss} at episode {episode}")
            params = adam.step(params, grads)
            losses.append(loss)

        ret = episode_returns(record, rule)[0]
        log.append({"episode": episode, "outcome": record.outcome,
                    "return": ret, "steps": record.n_steps,
                    "td_loss": (sum(losses) / len(losses)) if losses else None,
                    "epsilon": eps})
    return params, log


DEMOS_FORMAT = "socnav-demos"
DEMOS_VERSION = 1


def save_demos(dataset, path):
    """Demonstration dataset container: JSON header line plus raw float64
    arrays (robot parts, rotated human tuples, local maps, targets). Requires
    a constant human count, which one scenario config guarantees."""
    if not dataset:
        raise ValueError("refusing to save an empty demonstration dataset")
    n_humans = {len(e.rotated.humans) for e in dataset}
    if len(n_humans) != 1:
        raise ValueError(f"mixed human counts in dataset: {sorted(n_humans)}")
    robot = np.array([[e.rotated.d_g, e.rotated.v_pref, e.rotated.theta_rel,
                       e.rotated.radius] for e in dataset])
    humans = np.array([e.rotated.humans for e in dataset])
    maps = np.stack([e.maps for e in dataset])
    targets = np.array([e.target for e in dataset])
    header = {"format": DEMOS_FORMAT, "version": DEMOS_VERSION,
              "count": len(dataset),
              "humans_shape": list(humans.shape),
              "maps_shape": list(maps.shape)}
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for arr in (robot, humans, maps, targets):
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_demos(path):
    with open(path, "rb") as f:
        header = json.loads(f.readline())
        if header.get("format") != DEMOS_FORMAT or header.get("version") != DEMOS_VERSION:
            raise ValueError("not a demonstration dataset file")
        count = header["count"]
        humans_shape = tuple(header["humans_shape"])
        maps_shape = tuple(header["maps_shape"])
        def take(shape):
            n = int(np.prod(shape)) * 8
            blob = f.read(n)
            if len(blob) != n:
                raise ValueError("demonstration file truncated")
            return np.frombuffer(blob, dtype="<f8").reshape(shape).copy()
        robot = take((count, 4))
        humans = take(humans_shape)
        maps = take(maps_shape)
        targets = take((count,))
    out = []
    for i in range(count):
        rotated = RotatedState(robot[i, 0], robot[i, 1], robot[i, 2],
                               robot[i, 3],
                               tuple(tuple(h) for h in humans[i]))
        out.append(Experience(rotated, maps[i], float(targets[i])))
    return out
