"""Single-document run configuration: every module's knobs in one auditable
YAML file, with field-level validation and a content hash for manifests."""

import hashlib
import json
import math
from dataclasses import dataclass

import yaml

from .kinematics import StepConfig
from .orca import OrcaConfig
from .reward import RewardConfig
from .simulation import ScenarioConfig
from .training import TrainConfig
from .valuenet import NetworkConfig


class ConfigError(Exception):
    """Raised with the offending section/field in the message."""


@dataclass(frozen=True)
class ActionSpaceConfig:
    n_headings: int = 10
    dtheta_max_deg: float = 10.0

    @property
    def dtheta_max(self) -> float:
        return math.radians(self.dtheta_max_deg)


@dataclass(frozen=True)
class WorkbenchConfig:
    seed: int
    scenario: ScenarioConfig
    reward: RewardConfig
    step: StepConfig
    orca: OrcaConfig
    network: NetworkConfig
    train: TrainConfig
    actions: ActionSpaceConfig
    ablation: str

    def to_dict(self) -> dict:
        def plain(obj):
            out = {}
            for name in obj.__dataclass_fields__:
                value = getattr(obj, name)
                out[name] = list(value) if isinstance(value, tuple) else value
            return out

        return {"seed": self.seed,
                "scenario": plain(self.scenario),
                "reward": plain(self.reward),
                "step": plain(self.step),
                "orca": plain(self.orca),
                "network": plain(self.network),
                "train": plain(self.train),
                "actions": plain(self.actions),
                "ablation": self.ablation}

    @property
    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()


_SECTIONS = {
    "scenario": ScenarioConfig,
    "reward": RewardConfig,
    "step": StepConfig,
    "orca": OrcaConfig,
    "network": NetworkConfig,
    "train": TrainConfig,
    "actions": ActionSpaceConfig,
}

_TUPLE_FIELDS = {"robot_start", "robot_goal", "embed_dims", "attn_dims",
                 "head_dims"}


def _build_section(name, cls, data):
    if not isinstance(data, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    known = cls.__dataclass_fields__
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key '{name}.{key}'")
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = tuple(value) if key in _TUPLE_FIELDS else value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid section '{name}': {exc}")


def build_config(data: dict) -> WorkbenchConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config document must be a mapping")
    top_known = set(_SECTIONS) | {"seed", "ablation"}
    for key in data:
        if key not in top_known:
            raise ConfigError(f"unknown top-level key '{key}'")
    sections = {}
    for name, cls in _SECTIONS.items():
        sections[name] = _build_section(name, cls, data.get(name, {}))
    if "dt" not in data.get("orca", {}):
        # the crowd solver's collision-resolution horizon is the decision step
        sections["orca"] = _build_section(
            "orca", OrcaConfig,
            {**data.get("orca", {}), "dt": sections["step"].dt})
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("field 'seed' must be a non-negative integer")
    ablation = data.get("ablation", "full")
    if ablation not in ("full", "rc_only", "rc_rl", "rc_rt"):
        raise ConfigError(f"field 'ablation' has unknown value '{ablation}'")
    return WorkbenchConfig(seed=seed,
                           scenario=sections["scenario"],
                           reward=sections["reward"],
                           step=sections["step"],
                           orca=sections["orca"],
                           network=sections["network"],
                           train=sections["train"],
                           actions=sections["actions"],
                           ablation=ablation)


def load_config(path=None, overrides: dict = None) -> WorkbenchConfig:
    """Parse the YAML document (defaults when path is None) and apply
    flag-style overrides, e.g. {"seed": 7, "scenario.env_type": "concave"}."""
    data = {}
    if path is not None:
        try:
            with open(path) as f:
                data = yaml.safe_load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}")
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file is not valid YAML: {exc}")
        if data is None:
            data = {}
    for dotted, value in (overrides or {}).items():
        parts = dotted.split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override '{dotted}'")
        node[parts[-1]] = value
    return build_config(data)
