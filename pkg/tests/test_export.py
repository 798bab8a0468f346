import copy
import json
import math

import pytest

from socnav.domain import build_action_space
from socnav.evaluation import compute_metrics, run_evaluation
from socnav.export import (episode_to_obj, obj_to_record, read_records,
                           read_trajectory, validate, write_records,
                           write_trajectory)
from socnav.kinematics import StepConfig
from socnav.orca import OrcaConfig
from socnav.policies import OrcaPolicy, StraightPolicy
from socnav.reward import AblationFlags, RewardConfig
from socnav.simulation import ScenarioConfig

ACTIONS = build_action_space(1.0)
REWARD = RewardConfig()
STEP = StepConfig(0.25)
ORCA = OrcaConfig()


@pytest.fixture(scope="module")
def episode_objs():
    _, records = run_evaluation(
        OrcaPolicy(ACTIONS, ORCA, STEP), 3, 77,
        scenario_cfg=ScenarioConfig(n_dynamic=2, n_static=2,
                                    env_type="separated"),
        reward_cfg=REWARD, step_cfg=STEP, orca_cfg=ORCA,
        flags=AblationFlags())
    return [episode_to_obj(rec, configs_hash="abc123", master_seed=77,
                           episode_index=i, env_type="separated",
                           d_disc=REWARD.d_disc, t_limit=REWARD.t_limit,
                           dt=STEP.dt)
            for i, rec in enumerate(records)], records


def test_wellformed_episode_validates_clean(episode_objs):
    objs, _ = episode_objs
    for obj in objs:
        assert validate(obj) == []


def test_records_file_roundtrip(tmp_path, episode_objs):
    objs, _ = episode_objs
    path = tmp_path / "records.jsonl"
    write_records(path, objs)
    again = read_records(path)
    assert again == objs
    write_records(tmp_path / "records2.jsonl", again)
    assert (tmp_path / "records.jsonl").read_bytes() == \
           (tmp_path / "records2.jsonl").read_bytes()


def test_record_reingestion_reproduces_metrics(episode_objs):
    objs, records = episode_objs
    live = compute_metrics(records, REWARD.d_disc)
    parsed = [obj_to_record(o) for o in objs]
    again = compute_metrics(parsed, REWARD.d_disc)
    assert again == live


def test_trajectory_write_read_write_identical(tmp_path, episode_objs):
    objs, _ = episode_objs
    p1 = tmp_path / "ep.traj"
    p2 = tmp_path / "ep2.traj"
    write_trajectory(p1, objs[0])
    parsed = read_trajectory(p1)
    assert validate(parsed) == []
    write_trajectory(p2, parsed)
    assert p1.read_bytes() == p2.read_bytes()


def test_trajectory_numbers_are_9_significant_digits(tmp_path, episode_objs):
    objs, _ = episode_objs
    path = tmp_path / "ep.traj"
    write_trajectory(path, objs[0])
    for line in path.read_text().splitlines():
        doc = json.loads(line)
        if "step" in doc:
            for x in doc["step"]["robot"]:
                assert float(f"{x:.9g}") == x


def test_trajectory_line_structure(tmp_path, episode_objs):
    objs, _ = episode_objs
    path = tmp_path / "ep.traj"
    write_trajectory(path, objs[0])
    lines = path.read_text().splitlines()
    assert json.loads(lines[0])["schema"] == "socnav-trajectory"
    assert "footer" in json.loads(lines[-1])
    assert all("step" in json.loads(l) for l in lines[1:-1])
    assert len(lines) == len(objs[0]["steps"]) + 2


class TestValidatorViolations:
    def test_decreasing_time_named(self, episode_objs):
        objs, _ = episode_objs
        bad = copy.deepcopy(objs[0])
        bad["steps"][3]["t"] = bad["steps"][2]["t"] - 0.1
        problems = validate(bad)
        assert any("step 3" in p and "t" in p for p in problems)

    def test_human_count_change_named(self, episode_objs):
        objs, _ = episode_objs
        bad = copy.deepcopy(objs[0])
        bad["steps"][2]["humans"] = bad["steps"][2]["humans"][:-1]
        problems = validate(bad)
        assert any("step 2" in p and "humans" in p for p in problems)

    def test_unknown_version_rejected(self, episode_objs):
        objs, _ = episode_objs
        bad = copy.deepcopy(objs[0])
        bad["version"] = 99
        problems = validate(bad)
        assert len(problems) == 1
        assert "version" in problems[0]

    def test_action_null_only_terminal(self, episode_objs):
        objs, _ = episode_objs
        bad = copy.deepcopy(objs[0])
        bad["steps"][1]["action"] = None
        assert any("step 1" in p and "action" in p for p in validate(bad))
        bad2 = copy.deepcopy(objs[0])
        bad2["steps"][-1]["action"] = [1.0, 0.0]
        assert any("action" in p for p in validate(bad2))

    def test_outcome_and_step_count_checked(self, episode_objs):
        objs, _ = episode_objs
        bad = copy.deepcopy(objs[0])
        bad["footer"]["outcome"] = "exploded"
        assert any("outcome" in p for p in validate(bad))
        bad2 = copy.deepcopy(objs[0])
        bad2["footer"]["n_steps"] = 1234
        assert any("n_steps" in p for p in validate(bad2))

    def test_nonfinite_rejected(self, episode_objs):
        objs, _ = episode_objs
        bad = copy.deepcopy(objs[0])
        bad["steps"][1]["robot"][0] = math.inf
        assert any("step 1" in p and "robot" in p for p in validate(bad))
