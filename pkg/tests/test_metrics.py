#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
import numpy as np
import pytest

from multisource_tta.data_classes import RunRecord, StepRecord
from multisource_tta.errors import ContractViolationError
from multisource_tta.metrics import (
    PreferenceModel,
    arm_statistics,
    dynamic_expectations,
    mab_regret,
    madb_regret,
    overall_reward,
    preference_probability,
    regret_series,
    static_expectations,
    summarize,
)


@pytest.fixture(scope="module")
def preferences() -> PreferenceModel:
    return PreferenceModel(samples=100_000, seed=1)


def duel_run(skills, pairs) -> RunRecord:
    run = RunRecord("digest", "CO_UCB", 0, tuple(skills))
    for step, (i, j) in enumerate(pairs, start=1):
        run.append(StepRecord(step, i, j, (1, 0), (0, 0), 2, tuple(skills)))
    return run


class TestMabRegret:
    def test_best_arm_always(self):
        run = RunRecord("d", "UCB", 0, (0.2, 0.8))
        for step in range(1, 4):
            run.append(StepRecord(step, 1, None, (1,), (), 1, (0.2, 0.8)))
        assert mab_regret(run, static_expectations(run)) == 0.0

    def test_hand_computed(self, hand_run):
        assert mab_regret(hand_run, static_expectations(hand_run)) == pytest.approx(0.3)

    def test_single_arm(self):
        run = RunRecord("d", "UCB", 0, (0.4,))
        run.append(StepRecord(1, 0, None, (0,), (), 1, (0.4,)))
        assert mab_regret(run, static_expectations(run)) == 0.0

    def test_missing_expectations(self, hand_run):
        with pytest.raises(ContractViolationError):
            mab_regret(hand_run, np.zeros((1, 3)))

    def test_additive_over_segments(self, ucb_run):
        expected = dynamic_expectations(ucb_run)
        total = mab_regret(ucb_run, expected)
        first, second = ucb_run.segment(0, 7), ucb_run.segment(7, len(ucb_run.steps))
        parts = mab_regret(first, dynamic_expectations(first)) + mab_regret(
            second, dynamic_expectations(second)
        )
        assert total == pytest.approx(parts)

    def test_non_negative(self, ucb_run):
        for expected in (static_expectations(ucb_run), dynamic_expectations(ucb_run)):
            assert mab_regret(ucb_run, expected) >= 0.0


class TestMadbRegret:
    def test_evenly_matched(self):
        run = duel_run((0.9, 0.5), [(0, 1)])
        assert madb_regret(run, np.full((2, 2), 0.5)) == 0.0

    def test_hand_computed(self):
        run = duel_run((0.9, 0.5, 0.4), [(1, 2)])
        preference = np.full((3, 3), 0.5)
        preference[0, 1], preference[0, 2] = 0.7, 0.6
        assert madb_regret(run, preference) == pytest.approx(0.3)

    def test_identical_skills(self, preferences):
        skills = (0.5, 0.5, 0.5)
        run = duel_run(skills, [(0, 1), (1, 2), (0, 2)])
        assert madb_regret(run, preferences.win_matrix(skills)) == 0.0

    def test_probability_out_of_range(self):
        run = duel_run((0.9, 0.5), [(0, 1)])
        with pytest.raises(ContractViolationError):
            madb_regret(run, np.full((2, 2), 1.5))

    def test_single_arm_steps_rejected(self, hand_run):
        with pytest.raises(ContractViolationError):
            madb_regret(hand_run, np.full((3, 3), 0.5))

    def test_additive_over_segments(self, co_ucb_run, preferences):
        matrix = preferences.win_matrix(co_ucb_run.initial_skills)
        first, second = co_ucb_run.segment(0, 5), co_ucb_run.segment(5, len(co_ucb_run.steps))
        assert madb_regret(co_ucb_run, matrix) == pytest.approx(
            madb_regret(first, matrix) + madb_regret(second, matrix)
        )


class TestOverallReward:
    def test_zero(self):
        run = RunRecord("d", "UCB", 0, (0.5,))
        run.append(StepRecord(1, 0, None, (0, 0), (), 2, (0.5,)))
        assert overall_reward(run) == 0

    def test_direct_sum(self, hand_run):
        assert overall_reward(hand_run) == 3


class TestPreferenceProbability:
    def test_symmetric_for_equal_skills(self, preferences):
        estimate = preference_probability(0.5, 0.5, samples=100_000, seed=3)
        assert estimate == pytest.approx(float(preferences.strict(0.5, 0.5)), abs=0.01)

    def test_perfect_against_zero(self):
        assert preference_probability(1.0, 0.0, samples=100_000, seed=4) >= 0.99

    def test_matches_closed_form(self, preferences):
        estimate = preference_probability(0.9, 0.1, samples=100_000, seed=5)
        assert estimate == pytest.approx(float(preferences.strict(0.9, 0.1)), abs=0.02)

    def test_outcomes_sum_to_one(self, preferences):
        forward = preference_probability(0.7, 0.3, samples=100_000, seed=6)
        backward = preference_probability(0.3, 0.7, samples=100_000, seed=6)
        tie = float(preferences.tie(0.7, 0.3))
        assert forward + backward + tie == pytest.approx(1.0, abs=0.01)

    def test_deterministic(self):
        assert preference_probability(0.6, 0.4, samples=5000, seed=9) == preference_probability(
            0.6, 0.4, samples=5000, seed=9
        )


class TestPreferenceModel:
    def test_rates(self, preferences):
        assert preferences.perfect_rate == 0.0
        assert 0.0 < preferences.win_rate < 0.5

    def test_win_matrix(self, preferences):
        skills = np.array([0.6, 0.5, 0.55, 0.4, 0.3])
        matrix = preferences.win_matrix(skills)
        assert np.allclose(matrix + matrix.T, 1.0)
        assert np.allclose(np.diag(matrix), 0.5)
        expected = 0.5 + (1 - preferences.perfect_rate) * (skills[0] - skills[1]) / 2
        assert matrix[0, 1] == pytest.approx(expected)
        assert np.all(matrix[0] >= 0.5)

    def test_either_preferred(self, preferences):
        skills = np.array([0.2, 0.6, 1.0])
        either = preferences.either_preferred(skills, skills * 0.5)
        assert np.allclose(either, 1 - preferences.tie(skills, skills * 0.5))
        # a perfect first candidate only wins when the second misses
        assert either[2] == pytest.approx(0.5)
        assert either[1] > either[2]

    def test_win_matrix_per_step(self, preferences):
        skills = np.array([[0.6, 0.5], [0.2, 0.9]])
        matrices = preferences.win_matrix(skills)
        assert matrices.shape == (2, 2, 2)
        assert np.allclose(matrices[1], preferences.win_matrix(skills[1]))


class TestSummaries:
    def test_regret_series_non_negative(self, co_ucb_run, ucb_run, preferences):
        for run in (co_ucb_run, ucb_run):
            static, dynamic = regret_series(run, preferences)
            assert static.shape == dynamic.shape == (len(run.steps),)
            assert np.all(np.diff(static) >= -1e-12)
            assert np.all(np.diff(dynamic) >= -1e-12)
            assert static[0] >= 0.0 and dynamic[0] >= 0.0

    def test_arm_statistics(self, co_ucb_run):
        chosen, means, pairs = arm_statistics(co_ucb_run)
        assert sum(chosen) == 2 * len(co_ucb_run.steps)
        assert sum(pairs.values()) == len(co_ucb_run.steps)
        assert all(0.0 <= m <= 1.0 for m in means)

    def test_summarize(self, ucb_run, preferences):
        summary = summarize(ucb_run, preferences)
        static, dynamic = regret_series(ucb_run, preferences)
        assert summary.best_arm == ucb_run.best_arm
        assert summary.best_arm_skill == ucb_run.final_skills[ucb_run.best_arm]
        assert summary.overall_reward == overall_reward(ucb_run)
        assert summary.static_regret == pytest.approx(static[-1])
        assert summary.dynamic_regret == pytest.approx(dynamic[-1])
        assert summary.pair_counts == {}
        assert sum(summary.chosen_counts) == len(ucb_run.steps)

    def test_top2_preference_regret(self, preferences):
        run = RunRecord("d", "UCB_PREFERENCE", 0, (0.6, 1.0))
        for step in range(1, 4):
            run.append(StepRecord(step, 1, None, (1,), (), 1, (0.6, 1.0)))
        skills = np.array([0.6, 1.0])
        either = preferences.either_preferred(skills, skills * 0.5)
        static, dynamic = regret_series(run, preferences, top2_degradation=0.5)
        assert static[-1] == pytest.approx(3 * (either[0] - either[1]))
        assert dynamic[-1] == pytest.approx(static[-1])
        assert regret_series(run, preferences)[0][-1] == 0.0
        summary = summarize(run, preferences, top2_degradation=0.5)
        assert summary.static_regret == pytest.approx(static[-1])
