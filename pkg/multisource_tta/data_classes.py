"""The data_classes module contains the dataclasses holding spans, step logs and run results."""
#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional, Tuple

from multisource_tta.errors import ContractViolationError


@dataclass(frozen=True)
class BaseDataClass:
    """Base class for the simulator dataclasses.

    Each subclass has to implement a field metadata with name `header` for each of its attributes, for example:

        ``name : str = field(metadata={'header': '<User friendly field name>'})``

    """

    def to_dict(self) -> Dict:
        """Output the data class as a dict with the field headers as keys."""
        return {f.metadata["header"]: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class Span(BaseDataClass):
    """A closed interval of token indices over a passage.

    Parameters:
        start: The first token index of the span
        end: The last token index of the span, inclusive
    """

    start: int = field(metadata={"header": "Start"})
    end: int = field(metadata={"header": "End"})

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise ContractViolationError(
                f"Invalid span ({self.start}, {self.end}): need 0 <= start <= end"
            )

    def __len__(self) -> int:
        return self.end - self.start + 1

    def fits(self, passage_length: int) -> bool:
        """True if the span lies within a passage of ``passage_length`` tokens."""
        return self.end < passage_length


@dataclass(frozen=True)
class SpanPrediction(Span):
    """A predicted answer span."""


@dataclass(frozen=True)
class GoldSpan(Span):
    """The annotated answer span."""


@dataclass(frozen=True)
class TaskInstance(BaseDataClass):
    """One test instance of the synthetic span-prediction stream.

    Parameters:
        passage_length: Number of tokens in the passage
        gold: The annotated span
        instance_id: Position of the instance in its stream
    """

    passage_length: int = field(metadata={"header": "Passage Length"})
    gold: GoldSpan = field(metadata={"header": "Gold"})
    instance_id: int = field(default=0, metadata={"header": "Instance"})

    def __post_init__(self):
        if self.passage_length < 1 or not self.gold.fits(self.passage_length):
            raise ContractViolationError(
                f"Gold span {self.gold} does not fit a passage of length {self.passage_length}"
            )


@dataclass(frozen=True)
class StepRecord(BaseDataClass):
    """The log of one adaptation step.

    Parameters:
        step: Step index, starting at 1
        chosen_i: The selected arm, or the first arm of the selected pair
        chosen_j: The second arm of the selected pair, None for single-arm policies
        rewards_i: Per-instance rewards granted to ``chosen_i``
        rewards_j: Per-instance rewards granted to ``chosen_j``, empty for single-arm policies
        batch_size: Number of instances in the batch
        skills: Every model's skill when the arm(s) were selected
        corrupted_count: Number of feedback labels changed by the noise channel
    """

    step: int = field(metadata={"header": "Step"})
    chosen_i: int = field(metadata={"header": "Chosen i"})
    chosen_j: Optional[int] = field(metadata={"header": "Chosen j"})
    rewards_i: Tuple[int, ...] = field(metadata={"header": "Rewards i"})
    rewards_j: Tuple[int, ...] = field(metadata={"header": "Rewards j"})
    batch_size: int = field(metadata={"header": "Batch Size"})
    skills: Tuple[float, ...] = field(metadata={"header": "Skills"})
    corrupted_count: int = field(default=0, metadata={"header": "Corrupted"})

    def __post_init__(self):
        if len(self.rewards_i) != self.batch_size:
            raise ContractViolationError(
                f"Step {self.step}: {len(self.rewards_i)} rewards for a batch of {self.batch_size}"
            )
        if self.chosen_j is not None and len(self.rewards_j) != self.batch_size:
            raise ContractViolationError(
                f"Step {self.step}: {len(self.rewards_j)} rewards for a batch of {self.batch_size}"
            )
        for arm in (self.chosen_i, self.chosen_j):
            if arm is not None and not 0 <= arm < len(self.skills):
                raise ContractViolationError(f"Step {self.step}: invalid arm {arm}")

    @property
    def is_duel(self) -> bool:
        return self.chosen_j is not None

    @property
    def reward(self) -> int:
        """All reward granted in this step."""
        return sum(self.rewards_i) + sum(self.rewards_j)


@dataclass(frozen=True)
class ProbePoint(BaseDataClass):
    """Held-out evaluation of every model after ``instances_seen`` stream instances.

    Parameters:
        instances_seen: Stream instances consumed when the probe was taken
        f1: Mean index-wise F1 of each model on the probe instances
    """

    instances_seen: int = field(metadata={"header": "Instances"})
    f1: Tuple[float, ...] = field(metadata={"header": "F1"})


@dataclass
class RunRecord:
    """Seeded step-by-step log of one experiment.

    Parameters:
        config_digest: Digest of the experiment config
        policy: Name of the policy
        seed: The seed of the run
        initial_skills: Model skills before adaptation
        steps: The ordered step log
        best_arm: The final best-arm decision
        final_skills: Model skills after the last step
        probes: Held-out evaluation curve
        duration: Wall-clock seconds, excluded from equality
    """

    config_digest: str
    policy: str
    seed: int
    initial_skills: Tuple[float, ...]
    steps: List[StepRecord] = field(default_factory=list)
    best_arm: Optional[int] = None
    final_skills: Tuple[float, ...] = ()
    probes: List[ProbePoint] = field(default_factory=list)
    duration: float = field(default=0.0, compare=False)

    @property
    def num_arms(self) -> int:
        return len(self.initial_skills)

    @property
    def instances(self) -> int:
        """Number of stream instances consumed by the run."""
        return sum(s.batch_size for s in self.steps)

    def append(self, record: StepRecord):
        """Append a step, keeping step indices strictly increasing from 1."""
        expected = len(self.steps) + 1
        if record.step != expected:
            raise ContractViolationError(
                f"Step index {record.step} out of order, expected {expected}"
            )
        self.steps.append(record)

    def segment(self, start: int, stop: int) -> "RunRecord":
        """A copy holding the steps ``[start, stop)`` (0-based positions), renumbered from 1."""
        record = RunRecord(
            self.config_digest, self.policy, self.seed, self.initial_skills
        )
        for position, step in enumerate(self.steps[start:stop], start=1):
            record.append(_renumber(step, position))
        return record


def _renumber(step: StepRecord, index: int) -> StepRecord:
    return StepRecord(
        index,
        step.chosen_i,
        step.chosen_j,
        step.rewards_i,
        step.rewards_j,
        step.batch_size,
        step.skills,
        step.corrupted_count,
    )


@dataclass(frozen=True)
class RunSummary(BaseDataClass):
    """Summary of one run.

    Parameters:
        config_digest: Digest of the experiment config
        policy: The policy name
        seed: The run seed
        best_arm: The final best-arm decision
        best_arm_skill: True skill of the best arm at the end of the run
        overall_reward: Sum of all granted rewards
        static_regret: Regret against expectations frozen at the initial skills
        dynamic_regret: Regret against expectations from the current skills
        duration_seconds: Wall-clock duration of the run
        chosen_counts: Number of steps each arm took part in
        arm_mean_reward: Mean granted reward per instance for each arm
        pair_counts: Number of steps each pair was chosen, keyed ``"i-j"``
    """

    config_digest: str = field(metadata={"header": "Config"})
    policy: str = field(metadata={"header": "Policy"})
    seed: int = field(metadata={"header": "Seed"})
    best_arm: int = field(metadata={"header": "Best Arm"})
    best_arm_skill: float = field(metadata={"header": "Best Skill"})
    overall_reward: int = field(metadata={"header": "Overall Reward"})
    static_regret: Optional[float] = field(metadata={"header": "Static Regret"})
    dynamic_regret: Optional[float] = field(metadata={"header": "Dynamic Regret"})
    duration_seconds: float = field(metadata={"header": "Duration [s]"})
    chosen_counts: List[int] = field(
        default_factory=list, metadata={"header": "Chosen Counts"}
    )
    arm_mean_reward: List[float] = field(
        default_factory=list, metadata={"header": "Arm Mean Reward"}
    )
    pair_counts: Dict[str, int] = field(
        default_factory=dict, metadata={"header": "Pair Counts"}
    )
