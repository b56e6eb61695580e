#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
"""K-armed dueling bandits with the collaborative UCB (Co-UCB) policy.

Each step selects a pair of distinct source models. The user's preference between their predictions rewards at
most one of them per instance, and the preferred prediction is used to update both models.
"""

# System imports
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional, Sequence, Tuple

# Third party imports
import numpy as np

# Application imports
from multisource_tta.bandit import exploration_bonus
from multisource_tta.data_classes import SpanPrediction
from multisource_tta.errors import ContractViolationError


class PairId(NamedTuple):
    """A canonical pair of arms, ``i < j``."""

    i: int
    j: int

    @classmethod
    def of(cls, i: int, j: int, num_arms: Optional[int] = None) -> "PairId":
        """Build a canonical pair, rejecting ``i == j`` and arms outside ``[0, num_arms)``."""
        i, j = int(i), int(j)
        if i == j:
            raise ContractViolationError(f"A model cannot duel itself (arm {i})")
        if min(i, j) < 0 or (num_arms is not None and max(i, j) >= num_arms):
            raise ContractViolationError(
                f"Pair ({i}, {j}) invalid for {num_arms} arms"
            )
        return cls(min(i, j), max(i, j))

    def label(self) -> str:
        return f"{self.i}-{self.j}"


def all_pairs(num_arms: int) -> Iterator[PairId]:
    """The ``C(K, 2)`` canonical pairs in lexicographic order."""
    return (PairId(i, j) for i, j in itertools.combinations(range(num_arms), 2))


def check_duel_rewards(
    rewards_i: Sequence[int], rewards_j: Sequence[int]
) -> Tuple[np.ndarray, np.ndarray]:
    """Validate the reward vectors of a duel.

    Both vectors must be binary, non-empty and of equal length, and no instance may reward both models.
    """
    rewards_i = np.asarray(rewards_i, dtype=np.int64).reshape(-1)
    rewards_j = np.asarray(rewards_j, dtype=np.int64).reshape(-1)
    if rewards_i.size == 0 or rewards_i.size != rewards_j.size:
        raise ContractViolationError(
            f"Duel reward vectors of length {rewards_i.size} and {rewards_j.size}"
        )
    for rewards in (rewards_i, rewards_j):
        if np.any((rewards != 0) & (rewards != 1)):
            raise ContractViolationError(
                f"Rewards must be binary, got {rewards.tolist()}"
            )
    if np.any(rewards_i + rewards_j > 1):
        raise ContractViolationError("An instance rewarded both duel members")
    return rewards_i, rewards_j


@dataclass(eq=False)
class DuelLedger:
    """Reward bookkeeping of the dueling bandit.

    Attributes:
        num_arms: The number of arms ``K``, at least 2
        pair_count: Symmetric ``K x K`` matrix of instances judged per pair (``n_ij``), zero diagonal
        pair_reward_sum: Accumulated dueling reward per arm
        total_count: Instances judged so far (``N``)
        accumulate_total: If False, ``N`` is set to the last batch size instead of accumulated
    """

    num_arms: int
    pair_count: np.ndarray = field(default=None)
    pair_reward_sum: np.ndarray = field(default=None)
    total_count: int = 0
    accumulate_total: bool = True

    def __post_init__(self):
        if self.num_arms < 2:
            raise ContractViolationError("A dueling bandit needs at least two arms")
        if self.pair_count is None:
            self.pair_count = np.zeros((self.num_arms, self.num_arms), dtype=np.int64)
        if self.pair_reward_sum is None:
            self.pair_reward_sum = np.zeros(self.num_arms, dtype=np.int64)

    @property
    def duel_count(self) -> np.ndarray:
        """Instances each arm took part in, ``sum_k n_ik``."""
        return self.pair_count.sum(axis=1)

    @property
    def mean_duel_reward(self) -> np.ndarray:
        """How often each arm beat the arms it was paired with, 0 before its first duel."""
        counts = self.duel_count
        return np.divide(
            self.pair_reward_sum,
            counts,
            out=np.zeros(self.num_arms),
            where=counts > 0,
        )

    def check_pair(self, pair: Sequence[int]) -> PairId:
        i, j = pair
        if i == j:
            raise ContractViolationError(f"A model cannot duel itself (arm {i})")
        if not (0 <= i < j < self.num_arms):
            raise ContractViolationError(
                f"Pair ({i}, {j}) is not canonical for {self.num_arms} arms"
            )
        return PairId(int(i), int(j))


def co_ucb_index(ledger: DuelLedger, pair: Sequence[int]) -> float:
    """Pair index: mean of the two dueling rewards plus ``sqrt(2 ln(N) / n_ij)``."""
    i, j = ledger.check_pair(pair)
    bonus = exploration_bonus(ledger.total_count, int(ledger.pair_count[i, j]))
    if math.isinf(bonus):
        return bonus
    means = ledger.mean_duel_reward
    return float(means[i] + means[j]) / 2.0 + bonus


def select_pair(ledger: DuelLedger) -> PairId:
    """The pair with the largest index; ties go to the lexicographically first pair."""
    best, best_index = None, -math.inf
    for pair in all_pairs(ledger.num_arms):
        index = co_ucb_index(ledger, pair)
        if best is None or index > best_index:
            best, best_index = pair, index
    return best


def preference_rewards(score_i: float, score_j: float) -> Tuple[int, int]:
    """One-hot rewards for a preference: the strictly higher score wins, equal scores reward nobody."""
    return int(score_i > score_j), int(score_j > score_i)


def update_pair(
    ledger: DuelLedger,
    pair: Sequence[int],
    rewards_i: Sequence[int],
    rewards_j: Sequence[int],
) -> DuelLedger:
    """Fold one batch of duel rewards into the ledger.

    Both arms' dueling means absorb the batch, ``n_ij`` and ``n_ji`` grow by the batch size, and so does ``N``
    unless the ledger reproduces the literal ``N <- |B_t|`` assignment.
    """
    i, j = ledger.check_pair(pair)
    rewards_i, rewards_j = check_duel_rewards(rewards_i, rewards_j)
    size = rewards_i.size
    ledger.pair_reward_sum[i] += int(rewards_i.sum())
    ledger.pair_reward_sum[j] += int(rewards_j.sum())
    ledger.pair_count[i, j] += size
    ledger.pair_count[j, i] += size
    if ledger.accumulate_total:
        ledger.total_count += size
    else:
        ledger.total_count = size
    return ledger


def combine_predictions(
    pred_i: SpanPrediction, pred_j: SpanPrediction, r_i: int, r_j: int
) -> Optional[SpanPrediction]:
    """The preferred prediction, or None when the user had no preference."""
    if r_i and r_j:
        raise ContractViolationError("Both duel members were preferred")
    if r_i:
        return pred_i
    if r_j:
        return pred_j
    return None


def best_model(ledger: DuelLedger) -> int:
    """The single model kept after adaptation.

    Uses ``mean_j + sqrt(2 ln(2N) / sum_k n_jk)``: every duel consumes two arm slots. Ties go to the lowest index.
    """
    counts = ledger.duel_count
    means = ledger.mean_duel_reward
    indices = [
        means[arm] + exploration_bonus(2 * ledger.total_count, int(counts[arm]))
        for arm in range(ledger.num_arms)
    ]
    return int(np.argmax(indices))
