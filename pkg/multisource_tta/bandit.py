#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
"""K-armed bandit learning with the UCB policy.

Each arm is a source model. The ledger holds the running mean reward and pull count of every arm and the total
number of instances ``N`` seen so far.
"""

# System imports
import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

# Third party imports
import numpy as np

# Application imports
from multisource_tta.data_classes import GoldSpan, SpanPrediction
from multisource_tta.errors import ContractViolationError
from multisource_tta.feedback import make_preference, preference_to_rewards, span_f1


def exploration_bonus(total: int, count: int) -> float:
    """The confidence width ``sqrt(2 ln(N) / n)``.

    An unexplored arm (``n == 0``) gets an infinite bonus. For ``N <= 1`` the logarithm is clamped at 0.
    """
    if count == 0:
        return math.inf
    if total <= 1:
        return 0.0
    return math.sqrt(2.0 * math.log(total) / count)


def check_binary(rewards: Sequence[int]) -> np.ndarray:
    """Rewards as an integer array, rejecting empty batches and values outside {0, 1}."""
    rewards = np.asarray(rewards, dtype=np.int64).reshape(-1)
    if rewards.size == 0:
        raise ContractViolationError("Empty reward batch")
    if np.any((rewards != 0) & (rewards != 1)):
        raise ContractViolationError(f"Rewards must be binary, got {rewards.tolist()}")
    return rewards


@dataclass(eq=False)
class MabLedger:
    """Reward bookkeeping of the K-armed bandit.

    The mean reward is derived from an integer reward sum, so it always equals the replayed mean exactly.

    Attributes:
        num_arms: The number of arms ``K``
        reward_sum: Accumulated reward per arm
        pull_count: Instances judged per arm (``n``)
        total_count: Instances judged over all arms (``N``)
    """

    num_arms: int
    reward_sum: np.ndarray = field(default=None)
    pull_count: np.ndarray = field(default=None)
    total_count: int = 0

    def __post_init__(self):
        if self.num_arms < 1:
            raise ContractViolationError("A bandit needs at least one arm")
        if self.reward_sum is None:
            self.reward_sum = np.zeros(self.num_arms, dtype=np.int64)
        if self.pull_count is None:
            self.pull_count = np.zeros(self.num_arms, dtype=np.int64)

    @property
    def mean_reward(self) -> np.ndarray:
        """Running mean reward per arm, 0 for unexplored arms."""
        return np.divide(
            self.reward_sum,
            self.pull_count,
            out=np.zeros(self.num_arms),
            where=self.pull_count > 0,
        )

    def check_arm(self, arm: int) -> int:
        if not 0 <= arm < self.num_arms:
            raise ContractViolationError(
                f"Arm {arm} invalid for a ledger with {self.num_arms} arms"
            )
        return int(arm)


def ucb_index(ledger: MabLedger, arm: int) -> float:
    """Upper confidence bound of one arm: ``mean + sqrt(2 ln(N) / n)``."""
    arm = ledger.check_arm(arm)
    bonus = exploration_bonus(ledger.total_count, int(ledger.pull_count[arm]))
    if math.isinf(bonus):
        return bonus
    return float(ledger.mean_reward[arm]) + bonus


def ucb_indices(ledger: MabLedger) -> np.ndarray:
    return np.array([ucb_index(ledger, arm) for arm in range(ledger.num_arms)])


def select_arm(ledger: MabLedger) -> int:
    """The arm with the largest index; ties go to the lowest index."""
    # np.argmax returns the first maximum, infinite indices included
    return int(np.argmax(ucb_indices(ledger)))


def best_arm(ledger: MabLedger) -> int:
    """The adapted model returned after the stream ends."""
    return select_arm(ledger)


def update_binary(ledger: MabLedger, arm: int, rewards: Sequence[int]) -> MabLedger:
    """Fold a batch of binary rewards for ``arm`` into the ledger.

    For binary rewards ``r^T r`` is the number of ones, so the sum is used directly.
    """
    arm = ledger.check_arm(arm)
    rewards = check_binary(rewards)
    ledger.reward_sum[arm] += int(rewards.sum())
    ledger.pull_count[arm] += rewards.size
    ledger.total_count += rewards.size
    return ledger


def select_top2_prediction_feedback(
    pred_first: SpanPrediction, pred_second: SpanPrediction, gold: GoldSpan
) -> Tuple[int, int]:
    """Preference feedback over a single model's top two predictions.

    The candidates are scored by index-wise F1 and the strictly better one is rewarded. The rewarded candidate,
    if any, is the one used to update the model.
    """
    label = make_preference(span_f1(pred_first, gold), span_f1(pred_second, gold))
    return preference_to_rewards(label)
