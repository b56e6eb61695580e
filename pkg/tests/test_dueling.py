#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
import math
from fractions import Fraction

import numpy as np
import pytest

from multisource_tta.dueling import (
    DuelLedger,
    PairId,
    all_pairs,
    best_model,
    co_ucb_index,
    combine_predictions,
    preference_rewards,
    select_pair,
    update_pair,
)
from multisource_tta.errors import ContractViolationError
from multisource_tta.feedback import as_prediction


def duel_ledger(num_arms, reward_sums, pair_counts, total) -> DuelLedger:
    return DuelLedger(
        num_arms,
        np.asarray(pair_counts, dtype=np.int64),
        np.asarray(reward_sums, dtype=np.int64),
        total,
    )


class TestPairId:
    def test_canonical(self):
        assert PairId.of(3, 1) == PairId(1, 3)
        assert PairId.of(1, 3).label() == "1-3"

    @pytest.mark.parametrize("i, j", [(2, 2), (-1, 1), (0, 4)])
    def test_invalid(self, i, j):
        with pytest.raises(ContractViolationError):
            PairId.of(i, j, num_arms=4)

    def test_all_pairs(self):
        assert list(all_pairs(4)) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


class TestCoUcbIndex:
    def test_formula(self):
        counts = [[0, 50, 0], [50, 0, 0], [0, 0, 0]]
        # mu_0 = 30 / 50 = 0.6, mu_1 = 20 / 50 = 0.4
        ledger = duel_ledger(3, [30, 20, 0], counts, 1000)
        assert co_ucb_index(ledger, (0, 1)) == pytest.approx(1.0256, abs=1e-4)

    def test_unexplored_pair(self):
        assert co_ucb_index(DuelLedger(3), (0, 2)) == math.inf

    def test_clamped_bonus(self):
        ledger = duel_ledger(2, [0, 0], [[0, 1], [1, 0]], 1)
        assert co_ucb_index(ledger, (0, 1)) == 0.0

    def test_self_duel(self):
        with pytest.raises(ContractViolationError):
            co_ucb_index(DuelLedger(3), (1, 1))

    def test_too_few_arms(self):
        with pytest.raises(ContractViolationError):
            DuelLedger(1)


class TestSelectPair:
    def test_all_unexplored(self):
        assert select_pair(DuelLedger(3)) == (0, 1)

    def test_argmax(self):
        # Every pair judged 100 instances; arm means 0.5, 0.3, 0.9 give pair means 0.4, 0.7, 0.6
        counts = [[0, 100, 100], [100, 0, 100], [100, 100, 0]]
        ledger = duel_ledger(3, [100, 60, 180], counts, 300)
        assert select_pair(ledger) == (0, 2)

    def test_two_arms(self, rng):
        ledger = DuelLedger(2)
        for _ in range(10):
            pair = select_pair(ledger)
            assert pair == (0, 1)
            wins = rng.integers(0, 2, size=4)
            update_pair(ledger, pair, wins, np.zeros(4, dtype=np.int64))

    def test_tie_is_lexicographic(self):
        counts = np.full((3, 3), 10) - 10 * np.eye(3, dtype=np.int64)
        ledger = duel_ledger(3, [5, 5, 5], counts, 30)
        assert select_pair(ledger) == (0, 1)


class TestPreferenceRewards:
    @pytest.mark.parametrize(
        "scores, expected", [((0.8, 0.5), (1, 0)), ((0.5, 0.5), (0, 0)), ((0.0, 1.0), (0, 1))]
    )
    def test_preference_rewards(self, scores, expected):
        assert preference_rewards(*scores) == expected


class TestUpdatePair:
    def test_first_batch(self):
        ledger = update_pair(DuelLedger(3), (0, 1), [1, 0, 0], [0, 1, 0])
        assert ledger.mean_duel_reward[:2].tolist() == [1 / 3, 1 / 3]
        assert ledger.pair_count[0, 1] == ledger.pair_count[1, 0] == 3
        assert ledger.total_count == 3

    def test_running_mean(self):
        ledger = update_pair(DuelLedger(2), (0, 1), [1, 1, 0, 0], [0, 0, 0, 1])
        update_pair(ledger, (0, 1), [1, 1, 1, 1], [0, 0, 0, 0])
        assert ledger.mean_duel_reward[0] == 0.75

    def test_all_ties_dilute(self):
        ledger = update_pair(DuelLedger(2), (0, 1), [1, 0], [0, 1])
        update_pair(ledger, (0, 1), [0, 0], [0, 0])
        assert ledger.pair_reward_sum.tolist() == [1, 1]
        assert ledger.mean_duel_reward.tolist() == [0.25, 0.25]

    def test_literal_total_count(self):
        ledger = DuelLedger(3, accumulate_total=False)
        update_pair(ledger, (0, 1), [1, 0], [0, 1])
        update_pair(ledger, (1, 2), [1, 0, 0], [0, 0, 1])
        assert ledger.total_count == 3

    @pytest.mark.parametrize(
        "rewards_i, rewards_j",
        [([1, 0], [0]), ([1, 1], [1, 0]), ([], []), ([2], [0])],
    )
    def test_contract_violations(self, rewards_i, rewards_j):
        with pytest.raises(ContractViolationError):
            update_pair(DuelLedger(2), (0, 1), rewards_i, rewards_j)

    def test_non_canonical_pair(self):
        with pytest.raises(ContractViolationError):
            update_pair(DuelLedger(3), (2, 0), [1], [0])

    def test_replay_and_symmetry(self, rng):
        ledger = DuelLedger(4)
        wins = np.zeros(4, dtype=np.int64)
        duels = np.zeros(4, dtype=np.int64)
        for _ in range(300):
            i, j = select_pair(ledger)
            codes = rng.integers(0, 3, size=rng.integers(1, 8))
            rewards_i, rewards_j = (codes == 0).astype(int), (codes == 1).astype(int)
            update_pair(ledger, (i, j), rewards_i, rewards_j)
            wins[i] += rewards_i.sum()
            wins[j] += rewards_j.sum()
            duels[[i, j]] += codes.size
            assert np.array_equal(ledger.pair_count, ledger.pair_count.T)
            assert not ledger.pair_count.diagonal().any()
        for arm in range(4):
            expected = float(Fraction(int(wins[arm]), int(duels[arm])))
            assert ledger.mean_duel_reward[arm] == pytest.approx(expected, rel=1e-12)

    def test_swapped_roles_mirror(self):
        first = update_pair(DuelLedger(2), (0, 1), [1, 0, 0], [0, 1, 1])
        second = update_pair(DuelLedger(2), (0, 1), [0, 1, 1], [1, 0, 0])
        assert first.pair_reward_sum.tolist() == second.pair_reward_sum[::-1].tolist()
        assert np.array_equal(first.pair_count, second.pair_count)


class TestCombinePredictions:
    def test_one_hot(self):
        pred_i, pred_j = as_prediction(1, 3), as_prediction(2, 5)
        assert combine_predictions(pred_i, pred_j, 1, 0) is pred_i
        assert combine_predictions(pred_i, pred_j, 0, 1) is pred_j
        assert combine_predictions(pred_i, pred_j, 0, 0) is None

    def test_double_win(self):
        with pytest.raises(ContractViolationError):
            combine_predictions(as_prediction(1, 3), as_prediction(2, 5), 1, 1)


class TestBestModel:
    def test_dominant_mean(self):
        ledger = duel_ledger(2, [70, 30], [[0, 100], [100, 0]], 100)
        assert best_model(ledger) == 0

    def test_two_arms_larger_mean(self, rng):
        ledger = DuelLedger(2)
        for _ in range(20):
            codes = rng.choice(3, size=16, p=[0.2, 0.5, 0.3])
            update_pair(ledger, (0, 1), codes == 0, codes == 1)
        assert best_model(ledger) == int(np.argmax(ledger.mean_duel_reward))

    def test_larger_bonus_wins(self):
        # Sum of duels: arm 0 took part in 10, arm 1 in 200
        counts = [[0, 10, 0], [10, 0, 190], [0, 190, 0]]
        ledger = duel_ledger(3, [5, 100, 95], counts, 200)
        assert ledger.duel_count[:2].tolist() == [10, 200]
        assert best_model(ledger) == 0
