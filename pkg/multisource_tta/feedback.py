#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
"""Simulated user feedback.

The simulated user judges spans by index: binary feedback is an index-wise exact match, and preferences compare
the index-wise F1 of two candidates. Preference labels can be corrupted by a noise channel.
"""

# System imports
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

# Third party imports
import numpy as np

# Application imports
from multisource_tta.data_classes import GoldSpan, Span, SpanPrediction
from multisource_tta.errors import ContractViolationError

ROW_TOLERANCE = 1e-12


class PreferenceLabel(Enum):
    """The three options a user has when comparing two candidates."""

    LEFT_BETTER = ">"
    RIGHT_BETTER = "<"
    NO_PREFERENCE = "="

    @property
    def code(self) -> int:
        """Row/column of the label in a transition matrix."""
        return LABELS.index(self)

    @classmethod
    def from_code(cls, code: int) -> "PreferenceLabel":
        return LABELS[code]


LABELS = (
    PreferenceLabel.LEFT_BETTER,
    PreferenceLabel.RIGHT_BETTER,
    PreferenceLabel.NO_PREFERENCE,
)
LEFT, RIGHT, TIE = range(3)

# Reward pair granted for each label code
_LABEL_REWARDS = np.array([[1, 0], [0, 1], [0, 0]], dtype=np.int64)


EQUAL_SPLIT = ((0.0, 0.5, 0.5), (0.5, 0.0, 0.5), (0.5, 0.5, 0.0))


@dataclass(frozen=True)
class NoiseChannel:
    """Per-instance corruption of preference labels.

    A label is kept with probability ``1 - noise_rate``. Otherwise it is replaced by another label drawn from the
    corresponding row of ``corruption``, whose diagonal is zero so a corrupted label always changes.

    Parameters:
        noise_rate: Probability that a label is corrupted
        corruption: 3x3 row-stochastic matrix with zero diagonal, rows and columns ordered ``>``, ``<``, ``=``
    """

    noise_rate: float = 0.0
    corruption: Tuple[Tuple[float, ...], ...] = EQUAL_SPLIT

    def __post_init__(self):
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ContractViolationError(f"Noise rate {self.noise_rate} outside [0, 1]")
        matrix = np.asarray(self.corruption, dtype=float)
        if matrix.shape != (3, 3):
            raise ContractViolationError(
                f"Corruption matrix must be 3x3, got {matrix.shape}"
            )
        if np.any(matrix < 0) or np.any(np.diag(matrix) != 0):
            raise ContractViolationError(
                "Corruption matrix needs non-negative entries and a zero diagonal"
            )
        if np.any(np.abs(matrix.sum(axis=1) - 1.0) > ROW_TOLERANCE):
            raise ContractViolationError("Corruption matrix rows must sum to 1")
        object.__setattr__(
            self, "corruption", tuple(tuple(float(p) for p in row) for row in matrix)
        )

    @property
    def corruption_matrix(self) -> np.ndarray:
        return np.array(self.corruption)

    @property
    def transition(self) -> np.ndarray:
        """The full 3x3 label transition matrix."""
        return (1.0 - self.noise_rate) * np.eye(3) + self.noise_rate * self.corruption_matrix


def exact_match_reward(pred: Span, gold: Span) -> int:
    """Binary user feedback: 1 if both the predicted start and end match the annotated span."""
    return int(pred.start == gold.start and pred.end == gold.end)


def span_f1(pred: Span, gold: Span) -> float:
    """Index-wise F1 between the token index sets of the predicted and annotated spans.

    With closed intervals, ``2PR / (P + R)`` reduces to ``2 |overlap| / (|pred| + |gold|)``.
    """
    overlap = min(pred.end, gold.end) - max(pred.start, gold.start) + 1
    if overlap <= 0:
        return 0.0
    return 2 * overlap / (len(pred) + len(gold))


def exact_match_batch(
    starts: np.ndarray, ends: np.ndarray, gold_starts: np.ndarray, gold_ends: np.ndarray
) -> np.ndarray:
    """Vectorised :func:`exact_match_reward` over a batch."""
    return ((starts == gold_starts) & (ends == gold_ends)).astype(np.int64)


def span_f1_batch(
    starts: np.ndarray, ends: np.ndarray, gold_starts: np.ndarray, gold_ends: np.ndarray
) -> np.ndarray:
    """Vectorised :func:`span_f1` over a batch."""
    overlap = np.minimum(ends, gold_ends) - np.maximum(starts, gold_starts) + 1
    overlap = np.maximum(overlap, 0)
    lengths = (ends - starts + 1) + (gold_ends - gold_starts + 1)
    return 2 * overlap / lengths


def make_preference(score_left: float, score_right: float) -> PreferenceLabel:
    """The user prefers the candidate with the higher quality score.

    Scores are compared exactly. Index-wise F1 values are exact rationals, so equal spans give equal floats.
    """
    if score_left > score_right:
        return PreferenceLabel.LEFT_BETTER
    if score_right > score_left:
        return PreferenceLabel.RIGHT_BETTER
    return PreferenceLabel.NO_PREFERENCE


def make_preference_batch(scores_left: np.ndarray, scores_right: np.ndarray) -> np.ndarray:
    """Vectorised :func:`make_preference`, returning label codes."""
    codes = np.full(np.shape(scores_left), TIE, dtype=np.int64)
    codes[scores_left > scores_right] = LEFT
    codes[scores_right > scores_left] = RIGHT
    return codes


def apply_noise_batch(
    codes: np.ndarray, channel: NoiseChannel, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """Corrupt a batch of label codes.

    Two uniform draws are taken per label whatever the noise rate, so the random stream advances identically
    across noise rates.

    Returns:
        The possibly corrupted label codes and the boolean mask of corrupted positions.
    """
    codes = np.asarray(codes, dtype=np.int64)
    corrupt = rng.random(codes.shape) < channel.noise_rate
    pick = rng.random(codes.shape)
    cumulative = np.cumsum(channel.corruption_matrix, axis=1)
    # Rows sum to 1 only within tolerance
    cumulative[:, -1] = 1.0
    targets = (pick[..., None] >= cumulative[codes]).sum(axis=-1)
    noisy = np.where(corrupt, targets, codes)
    return noisy, corrupt


def apply_noise(
    label: PreferenceLabel, channel: NoiseChannel, rng: np.random.Generator
) -> PreferenceLabel:
    """Pass one preference label through the noise channel."""
    noisy, _ = apply_noise_batch(np.array([label.code]), channel, rng)
    return PreferenceLabel.from_code(int(noisy[0]))


def preference_to_rewards(label: PreferenceLabel) -> Tuple[int, int]:
    """Map a label onto the one-hot reward pair of the two candidates."""
    left, right = _LABEL_REWARDS[label.code]
    return int(left), int(right)


def preference_to_rewards_batch(codes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`preference_to_rewards`."""
    rewards = _LABEL_REWARDS[np.asarray(codes, dtype=np.int64)]
    return rewards[..., 0], rewards[..., 1]


def as_prediction(start: int, end: int) -> SpanPrediction:
    return SpanPrediction(int(start), int(end))


def as_gold(start: int, end: int) -> GoldSpan:
    return GoldSpan(int(start), int(end))
