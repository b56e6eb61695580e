#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
"""Synthetic span-prediction environment.

Source models are stand-ins for fine-tunable span extractors. A model emits the annotated span with probability
``skill`` and otherwise a perturbed span around it. Fine-tuning is replaced by a reward-weighted convex update of
the skill, ``skill <- skill + gain * (rewarded / batch) * (1 - skill)``.
"""

# System imports
from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

# Third party imports
import numpy as np

# Application imports
from multisource_tta import (
    BATCH_SIZE,
    DEFAULT_SKILLS,
    LEARNING_GAIN,
    MAX_ANSWER_LENGTH,
    PASSAGE_LENGTH_RANGE,
    PERTURB_WIDTH,
    SPARSE_SKILLS,
    STREAM_LENGTH,
    TOP2_DEGRADATION,
)
from multisource_tta.data_classes import SpanPrediction, TaskInstance
from multisource_tta.dueling import check_duel_rewards
from multisource_tta.errors import ContractViolationError
from multisource_tta.feedback import as_gold, span_f1_batch

Spans = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class SyntheticModel:
    """A source model reduced to its skill and update dynamics.

    Parameters:
        skill: Probability of emitting the annotated span exactly
        learning_gain: Fraction of the remaining gap ``1 - skill`` closed by a fully rewarded batch
        perturb_width: Largest shift of a start or end index in a wrong prediction
        top2_degradation: Skill factor of the second-best candidate
    """

    skill: float
    learning_gain: float = LEARNING_GAIN
    perturb_width: int = PERTURB_WIDTH
    top2_degradation: float = TOP2_DEGRADATION

    def __post_init__(self):
        if not 0.0 <= self.skill <= 1.0:
            raise ContractViolationError(f"Skill {self.skill} outside [0, 1]")
        if not 0.0 < self.learning_gain < 1.0:
            raise ContractViolationError(
                f"Learning gain {self.learning_gain} outside (0, 1)"
            )
        if self.perturb_width < 1:
            raise ContractViolationError(
                f"Perturb width {self.perturb_width} must be positive"
            )
        if not 0.0 < self.top2_degradation <= 1.0:
            raise ContractViolationError(
                f"Top-2 degradation {self.top2_degradation} outside (0, 1]"
            )


@dataclass(frozen=True)
class DomainProfile:
    """The source models and stream of one target domain.

    Parameters:
        initial_skills: Skill of each source model before adaptation
        stream_length: Number of test instances in the stream
        batch_size: Instances per adaptation step
        seed: Seed of the stream and of the simulated users
        passage_length_range: Inclusive range of passage lengths
        max_answer_length: Longest annotated span
    """

    initial_skills: Tuple[float, ...] = DEFAULT_SKILLS
    stream_length: int = STREAM_LENGTH
    batch_size: int = BATCH_SIZE
    seed: int = 0
    passage_length_range: Tuple[int, int] = PASSAGE_LENGTH_RANGE
    max_answer_length: int = MAX_ANSWER_LENGTH

    def __post_init__(self):
        object.__setattr__(
            self, "initial_skills", tuple(float(s) for s in self.initial_skills)
        )
        object.__setattr__(
            self, "passage_length_range", tuple(int(n) for n in self.passage_length_range)
        )
        if not self.initial_skills:
            raise ContractViolationError("A domain profile needs at least one model")
        if any(not 0.0 <= s <= 1.0 for s in self.initial_skills):
            raise ContractViolationError(
                f"Initial skills {self.initial_skills} outside [0, 1]"
            )
        if self.batch_size < 1:
            raise ContractViolationError(f"Batch size {self.batch_size} must be positive")
        check_length_range(self.passage_length_range)
        if self.max_answer_length < 1:
            raise ContractViolationError("The longest answer must have a token")

    @property
    def num_models(self) -> int:
        return len(self.initial_skills)

    @property
    def passage_model(self) -> "PassageModel":
        return PassageModel(self.passage_length_range, self.max_answer_length)

    @property
    def num_steps(self) -> int:
        """Full batches in the stream; a trailing partial batch is dropped."""
        return self.stream_length // self.batch_size

    def truncated(self, num_models: int) -> "DomainProfile":
        """The profile restricted to the first ``num_models`` sources."""
        if not 1 <= num_models <= self.num_models:
            raise ContractViolationError(
                f"Cannot keep {num_models} of {self.num_models} sources"
            )
        return replace(self, initial_skills=self.initial_skills[:num_models])

    @classmethod
    def sparse(cls, **kwargs) -> "DomainProfile":
        """A feedback-sparse profile where every source rarely hits the annotated span."""
        return cls(initial_skills=SPARSE_SKILLS, **kwargs)

    def models(
        self,
        learning_gain: float = LEARNING_GAIN,
        perturb_width: int = PERTURB_WIDTH,
        top2_degradation: float = TOP2_DEGRADATION,
    ) -> List[SyntheticModel]:
        """Instantiate the source models of this profile."""
        return [
            SyntheticModel(skill, learning_gain, perturb_width, top2_degradation)
            for skill in self.initial_skills
        ]


@dataclass(frozen=True)
class PassageModel:
    """Distribution of synthetic instances.

    Parameters:
        passage_length_range: Inclusive range of passage lengths
        max_answer_length: Longest annotated span
    """

    passage_length_range: Tuple[int, int] = PASSAGE_LENGTH_RANGE
    max_answer_length: int = MAX_ANSWER_LENGTH

    def sample(self, generator: np.random.Generator, size: int) -> "TaskBatch":
        return sample_batch(
            generator, size, self.passage_length_range, self.max_answer_length
        )


@dataclass(frozen=True, eq=False)
class TaskBatch:
    """A batch of stream instances held as arrays."""

    passage_lengths: np.ndarray
    gold_starts: np.ndarray
    gold_ends: np.ndarray
    first_id: int = 0

    def __len__(self) -> int:
        return len(self.passage_lengths)

    def instance(self, k: int) -> TaskInstance:
        return TaskInstance(
            int(self.passage_lengths[k]),
            as_gold(self.gold_starts[k], self.gold_ends[k]),
            self.first_id + k,
        )

    @classmethod
    def of(cls, instances: Sequence[TaskInstance]) -> "TaskBatch":
        return cls(
            np.array([i.passage_length for i in instances], dtype=np.int64),
            np.array([i.gold.start for i in instances], dtype=np.int64),
            np.array([i.gold.end for i in instances], dtype=np.int64),
            instances[0].instance_id if instances else 0,
        )


def check_length_range(passage_length_range: Sequence[int]):
    if len(passage_length_range) != 2:
        raise ContractViolationError("A passage length range needs a low and a high bound")
    low, high = passage_length_range
    if low < 1 or high < low:
        raise ContractViolationError(f"Empty passage length range {passage_length_range}")


def sample_batch(
    generator: np.random.Generator,
    size: int,
    passage_length_range: Sequence[int] = PASSAGE_LENGTH_RANGE,
    max_answer_length: int = MAX_ANSWER_LENGTH,
    first_id: int = 0,
) -> TaskBatch:
    """Sample ``size`` instances: a uniform passage length, a uniform answer length and a uniform answer start."""
    check_length_range(passage_length_range)
    low, high = passage_length_range
    lengths = generator.integers(low, high + 1, size=size)
    answer_lengths = generator.integers(1, np.minimum(max_answer_length, lengths) + 1)
    starts = generator.integers(0, lengths - answer_lengths + 1)
    return TaskBatch(lengths, starts, starts + answer_lengths - 1, first_id)


def sample_instance(
    generator: np.random.Generator,
    passage_length_range: Sequence[int] = PASSAGE_LENGTH_RANGE,
    max_answer_length: int = MAX_ANSWER_LENGTH,
    instance_id: int = 0,
) -> TaskInstance:
    """Sample one instance of the synthetic stream."""
    return sample_batch(
        generator, 1, passage_length_range, max_answer_length, instance_id
    ).instance(0)


class InstanceStream:
    """The seeded stream of test instances.

    Args:
        generator: The random source owned by the stream
        passage_length_range: Inclusive range of passage lengths
        max_answer_length: Longest annotated span
    """

    def __init__(
        self,
        generator: np.random.Generator,
        passage_length_range: Sequence[int] = PASSAGE_LENGTH_RANGE,
        max_answer_length: int = MAX_ANSWER_LENGTH,
    ):
        self._generator = generator
        self._range = tuple(passage_length_range)
        self._max_answer_length = max_answer_length
        self._consumed = 0

    @property
    def consumed(self) -> int:
        """Number of instances drawn so far."""
        return self._consumed

    def next_batch(self, size: int) -> TaskBatch:
        batch = sample_batch(
            self._generator, size, self._range, self._max_answer_length, self._consumed
        )
        self._consumed += size
        return batch


def _perturb(
    gold_starts: np.ndarray,
    gold_ends: np.ndarray,
    last: np.ndarray,
    perturb_width: int,
    rng: np.random.Generator,
) -> Spans:
    n = gold_starts.size
    offsets = rng.integers(1, perturb_width + 1, size=(2, n))
    signs = rng.integers(0, 2, size=(2, n)) * 2 - 1
    starts = np.clip(gold_starts + signs[0] * offsets[0], 0, last)
    ends = np.clip(gold_ends + signs[1] * offsets[1], 0, last)
    return np.minimum(starts, ends), np.maximum(starts, ends)


def predict_spans(
    skill: float, perturb_width: int, batch: TaskBatch, rng: np.random.Generator
) -> Spans:
    """Predicted start and end arrays for a batch at a given skill.

    A wrong prediction shifts the annotated start and end independently by ``1..perturb_width`` tokens in a
    random direction, clipped to the passage and reordered so that start <= end. Shifts that land back on the
    annotated span, through clipping or reordering, are redrawn, so the exact-match rate equals the skill. A
    one-token passage has no wrong span and is always answered exactly.
    """
    n = len(batch)
    correct = rng.random(n) < skill
    gold_starts, gold_ends = batch.gold_starts, batch.gold_ends
    last = batch.passage_lengths - 1
    starts, ends = _perturb(gold_starts, gold_ends, last, perturb_width, rng)
    pending = np.flatnonzero(
        ~correct & (starts == gold_starts) & (ends == gold_ends) & (last > 0)
    )
    while pending.size:
        redrawn = _perturb(
            gold_starts[pending], gold_ends[pending], last[pending], perturb_width, rng
        )
        starts[pending], ends[pending] = redrawn
        pending = pending[
            (redrawn[0] == gold_starts[pending]) & (redrawn[1] == gold_ends[pending])
        ]
    return (
        np.where(correct, gold_starts, starts),
        np.where(correct, gold_ends, ends),
    )


def predict_batch(
    model: SyntheticModel, batch: TaskBatch, rng: np.random.Generator
) -> Spans:
    return predict_spans(model.skill, model.perturb_width, batch, rng)


def predict_top2_batch(
    model: SyntheticModel, batch: TaskBatch, rng: np.random.Generator
) -> Tuple[Spans, Spans]:
    """Best and second-best candidates; the second is drawn independently at a degraded skill."""
    first = predict_spans(model.skill, model.perturb_width, batch, rng)
    second = predict_spans(
        model.skill * model.top2_degradation, model.perturb_width, batch, rng
    )
    return first, second


def predict(
    model: SyntheticModel, instance: TaskInstance, rng: np.random.Generator
) -> SpanPrediction:
    """The model's prediction for one instance."""
    starts, ends = predict_batch(model, TaskBatch.of([instance]), rng)
    return SpanPrediction(int(starts[0]), int(ends[0]))


def predict_top2(
    model: SyntheticModel, instance: TaskInstance, rng: np.random.Generator
) -> Tuple[SpanPrediction, SpanPrediction]:
    """The model's top two predictions for one instance."""
    first, second = predict_top2_batch(model, TaskBatch.of([instance]), rng)
    return (
        SpanPrediction(int(first[0][0]), int(first[1][0])),
        SpanPrediction(int(second[0][0]), int(second[1][0])),
    )


def adapt(model: SyntheticModel, reward_count: int, batch_size: int) -> SyntheticModel:
    """Reward-weighted skill update; a batch without rewards leaves the model unchanged."""
    if batch_size < 1:
        raise ContractViolationError(f"Batch size {batch_size} must be positive")
    if not 0 <= reward_count <= batch_size:
        raise ContractViolationError(
            f"Reward count {reward_count} outside [0, {batch_size}]"
        )
    if reward_count == 0:
        return model
    step = model.learning_gain * (reward_count / batch_size) * (1.0 - model.skill)
    return replace(model, skill=min(1.0, model.skill + step))


def collaborative_adapt(
    model_i: SyntheticModel,
    model_j: SyntheticModel,
    rewards_i: Sequence[int],
    rewards_j: Sequence[int],
    batch_size: int,
    collaborative: bool = True,
) -> Tuple[SyntheticModel, SyntheticModel]:
    """Update a dueling pair from the preferred predictions.

    Every instance with a preference trains both models on the preferred prediction. Without collaboration each
    model only learns from the instances it won.
    """
    rewards_i, rewards_j = check_duel_rewards(rewards_i, rewards_j)
    if collaborative:
        shared = int(np.sum(rewards_i + rewards_j))
        return adapt(model_i, shared, batch_size), adapt(model_j, shared, batch_size)
    return (
        adapt(model_i, int(np.sum(rewards_i)), batch_size),
        adapt(model_j, int(np.sum(rewards_j)), batch_size),
    )


class Prober:
    """Held-out evaluation on fresh instances from an independent random stream.

    Args:
        generator: Random source for probe instances and probe predictions
        size: Number of fresh instances per probe
        passage_length_range: Inclusive range of passage lengths
        max_answer_length: Longest annotated span
    """

    def __init__(
        self,
        generator: np.random.Generator,
        size: int,
        passage_length_range: Sequence[int] = PASSAGE_LENGTH_RANGE,
        max_answer_length: int = MAX_ANSWER_LENGTH,
    ):
        self._generator = generator
        self._size = size
        self._range = tuple(passage_length_range)
        self._max_answer_length = max_answer_length

    def score(self, models: Sequence[SyntheticModel]) -> Tuple[float, ...]:
        """Mean index-wise F1 of each model on one fresh probe batch shared by all models."""
        batch = sample_batch(
            self._generator, self._size, self._range, self._max_answer_length
        )
        scores = []
        for model in models:
            starts, ends = predict_batch(model, batch, self._generator)
            f1 = span_f1_batch(starts, ends, batch.gold_starts, batch.gold_ends)
            scores.append(float(np.mean(f1)))
        return tuple(scores)
