#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
import pandas as pd
import pytest
import yaml

from multisource_tta.environment import DomainProfile
from multisource_tta.errors import OutputError
from multisource_tta.feedback import NoiseChannel
from multisource_tta.harness import PolicyKind, run_and_evaluate
from multisource_tta.writers import AGGREGATE_COLUMNS, AGGREGATE_FILE, write_outputs

STEP_COLUMNS = [
    "step",
    "chosen_i",
    "chosen_j",
    "batch_reward_i",
    "batch_reward_j",
    "cum_reward",
    "static_regret",
    "dynamic_regret",
    "skill_0",
    "skill_1",
    "skill_2",
    "corrupted_count",
]


@pytest.fixture
def ten_step_profile() -> DomainProfile:
    return DomainProfile(initial_skills=(0.6, 0.4, 0.3), stream_length=160, batch_size=16, seed=3)


class TestWriteOutputs:
    def test_empty_records(self, tmp_path):
        written = write_outputs([], tmp_path)
        assert written == [tmp_path / AGGREGATE_FILE]
        assert (tmp_path / AGGREGATE_FILE).read_text().splitlines() == [",".join(AGGREGATE_COLUMNS)]

    def test_step_csv(self, tmp_path, make_config, ten_step_profile):
        result = run_and_evaluate(make_config(PolicyKind.UCB, profile=ten_step_profile), "UCB")
        write_outputs([result], tmp_path)
        steps = pd.read_csv(tmp_path / "run000_UCB_seed3_steps.csv")
        assert list(steps.columns) == STEP_COLUMNS
        assert len(steps) == 10
        assert steps["chosen_j"].isna().all()
        assert steps["cum_reward"].iloc[-1] == result.summary.overall_reward

    def test_duel_step_csv(self, tmp_path, make_config, ten_step_profile):
        result = run_and_evaluate(make_config(PolicyKind.CO_UCB, profile=ten_step_profile))
        write_outputs([result], tmp_path)
        steps = pd.read_csv(tmp_path / "run000_CO_UCB_seed3_steps.csv")
        assert steps["chosen_j"].notna().all()
        assert (steps["chosen_i"] < steps["chosen_j"]).all()
        rewards = steps["batch_reward_i"] + steps["batch_reward_j"]
        assert (rewards <= 16).all()

    def test_summary_and_probes(self, tmp_path, make_config, ten_step_profile):
        result = run_and_evaluate(make_config(PolicyKind.CO_UCB, profile=ten_step_profile))
        write_outputs([result], tmp_path, "seed")
        summary = yaml.safe_load((tmp_path / "run000_CO_UCB_seed3_summary.yaml").read_text())
        assert summary["config_digest"] == result.summary.config_digest
        assert summary["best_arm"] == result.record.best_arm
        assert set(summary) >= {"static_regret", "dynamic_regret", "duration_seconds", "pair_counts"}
        probes = pd.read_csv(tmp_path / "run000_CO_UCB_seed3_probes.csv")
        assert list(probes.columns) == ["instances_seen", "f1_0", "f1_1", "f1_2"]
        assert probes["instances_seen"].tolist() == [0, 64, 128]
        aggregate = pd.read_csv(tmp_path / AGGREGATE_FILE)
        assert aggregate["parameter"].tolist() == ["seed"]
        assert aggregate["runs"].tolist() == [1]

    def test_disabled_regret_column_empty(self, tmp_path, make_config, ten_step_profile):
        config = make_config(PolicyKind.UCB, profile=ten_step_profile, dynamic_regret=False)
        write_outputs([run_and_evaluate(config)], tmp_path)
        steps = pd.read_csv(tmp_path / "run000_UCB_seed3_steps.csv")
        assert steps["dynamic_regret"].isna().all()
        assert steps["static_regret"].notna().all()

    @pytest.mark.parametrize("policy", [PolicyKind.UCB, PolicyKind.CO_UCB])
    def test_byte_identical_reruns(self, tmp_path, make_config, policy):
        config = make_config(policy, noise=NoiseChannel(0.1))
        for folder in ("first", "second"):
            write_outputs([run_and_evaluate(config)], tmp_path / folder)
        for name in ("steps", "probes"):
            file = f"run000_{policy.value}_seed7_{name}.csv"
            assert (tmp_path / "first" / file).read_bytes() == (tmp_path / "second" / file).read_bytes()

    def test_rewrite_identical(self, tmp_path, make_config):
        result = run_and_evaluate(make_config(PolicyKind.UCB))
        write_outputs([result], tmp_path)
        before = (tmp_path / "run000_UCB_seed7_steps.csv").read_bytes()
        write_outputs([result], tmp_path)
        assert (tmp_path / "run000_UCB_seed7_steps.csv").read_bytes() == before

    def test_unwritable_folder(self, tmp_path):
        blocker = tmp_path / "file.txt"
        blocker.write_text("not a folder")
        with pytest.raises(OutputError) as error:
            write_outputs([], blocker)
        assert error.value.path == blocker
