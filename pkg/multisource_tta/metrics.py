#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
"""Regret accounting, overall rewards and run summaries.

Models adapt during a run, so the expected reward of an arm is ambiguous. Every regret is available in two
variants: ``static`` freezes expectations at the initial skills, ``dynamic`` takes them from the skills recorded at
each step. The best arm ``a*`` is the arm with the highest true skill under the same variant.

Top-2 preference runs reward a model when the user prefers one of its two candidates, so their expected reward is
``PreferenceModel.either_preferred`` of the skill and its degraded copy rather than the skill itself, and ``a*`` is
the arm maximising that probability.
"""

# System imports
from collections import Counter
from typing import Optional, Tuple

# Third party imports
import numpy as np
from loguru import logger

# Application imports
from multisource_tta import PERTURB_WIDTH, PREFERENCE_SAMPLES
from multisource_tta.data_classes import RunRecord, RunSummary
from multisource_tta.dueling import PairId
from multisource_tta.environment import PassageModel, predict_spans
from multisource_tta.errors import ContractViolationError
from multisource_tta.feedback import span_f1_batch


def static_expectations(run: RunRecord) -> np.ndarray:
    """Per-step expected rewards frozen at the initial skills, shape ``(T, K)``."""
    return np.tile(np.asarray(run.initial_skills, dtype=float), (len(run.steps), 1))


def dynamic_expectations(run: RunRecord) -> np.ndarray:
    """Per-step expected rewards taken from the skills at selection time, shape ``(T, K)``."""
    if not run.steps:
        return np.zeros((0, run.num_arms))
    return np.array([step.skills for step in run.steps], dtype=float)


def _check_expectations(run: RunRecord, expected: np.ndarray) -> np.ndarray:
    expected = np.asarray(expected, dtype=float)
    if expected.shape != (len(run.steps), run.num_arms) or np.any(np.isnan(expected)):
        raise ContractViolationError(
            f"Expected rewards of shape {expected.shape} do not cover "
            f"{len(run.steps)} steps x {run.num_arms} arms"
        )
    return expected


def mab_regret_terms(run: RunRecord, expected_rewards: np.ndarray) -> np.ndarray:
    """Per-step regret ``mu*_t - mu_t(a_t)`` of the arm chosen at each step."""
    expected = _check_expectations(run, expected_rewards)
    if not run.steps:
        return np.zeros(0)
    chosen = np.array([step.chosen_i for step in run.steps])
    rows = np.arange(len(run.steps))
    return expected.max(axis=1) - expected[rows, chosen]


def mab_regret(run: RunRecord, expected_rewards: np.ndarray) -> float:
    """Cumulative regret of single-arm selection against the best model."""
    return float(np.sum(mab_regret_terms(run, expected_rewards)))


def _check_preferences(run: RunRecord, preference: np.ndarray) -> np.ndarray:
    preference = np.asarray(preference, dtype=float)
    k = run.num_arms
    if preference.shape == (k, k):
        preference = np.broadcast_to(preference, (len(run.steps), k, k))
    if preference.shape != (len(run.steps), k, k):
        raise ContractViolationError(
            f"Preference probabilities of shape {preference.shape} do not cover "
            f"{len(run.steps)} steps x {k} x {k} arms"
        )
    if np.any(np.isnan(preference)) or np.any((preference < 0) | (preference > 1)):
        raise ContractViolationError("Preference probabilities outside [0, 1]")
    return preference


def madb_regret_terms(
    run: RunRecord, preference_model: np.ndarray, best_arms: Optional[np.ndarray] = None
) -> np.ndarray:
    """Per-step strong regret ``eps(a*, a_i) + eps(a*, a_j)`` of the chosen pairs.

    Args:
        run: A run of a dueling policy
        preference_model: ``P(a > b)`` as a ``(K, K)`` matrix or one matrix per step ``(T, K, K)``
        best_arms: ``a*`` per step. Defaults to the arm with the highest initial skill.
    """
    preference = _check_preferences(run, preference_model)
    if not run.steps:
        return np.zeros(0)
    if best_arms is None:
        best_arms = np.full(len(run.steps), int(np.argmax(run.initial_skills)))
    terms = np.zeros(len(run.steps))
    for t, step in enumerate(run.steps):
        if not step.is_duel:
            raise ContractViolationError(f"Step {step.step} did not select a pair")
        star = int(best_arms[t])
        for arm in (step.chosen_i, step.chosen_j):
            # eps(a*, a*) is 0 by convention
            if arm != star:
                terms[t] += preference[t, star, arm] - 0.5
    return terms


def madb_regret(
    run: RunRecord, preference_model: np.ndarray, best_arms: Optional[np.ndarray] = None
) -> float:
    """Cumulative strong regret of pair selection."""
    return float(np.sum(madb_regret_terms(run, preference_model, best_arms)))


def overall_reward(run: RunRecord) -> int:
    """Sum of all rewards granted during the run, over every step and model."""
    return sum(step.reward for step in run.steps)


def preference_probability(
    skill_i: float,
    skill_j: float,
    perturb_width: int = PERTURB_WIDTH,
    passage_model: PassageModel = PassageModel(),
    samples: int = PREFERENCE_SAMPLES,
    seed: int = 0,
) -> float:
    """Monte Carlo estimate of ``P(F1_i > F1_j)`` for independent predictions on a shared random instance."""
    rng = np.random.default_rng(seed)
    batch = passage_model.sample(rng, samples)
    f1 = []
    for skill in (skill_i, skill_j):
        starts, ends = predict_spans(skill, perturb_width, batch, rng)
        f1.append(span_f1_batch(starts, ends, batch.gold_starts, batch.gold_ends))
    return float(np.mean(f1[0] > f1[1]))


class PreferenceModel:
    """User preference probabilities between synthetic models as a function of their skills.

    The correctness of a prediction is drawn independently of its perturbation, so conditioning on which of the
    two predictions hit the annotated span gives

        ``P(i > j) = s_i (1 - s_j) (1 - pi) + (1 - s_i)(1 - s_j) w``

    with ``pi`` the probability that a perturbed span still scores F1 = 1 and ``w`` the probability that one
    perturbed span strictly beats another. Both are estimated once by seeded Monte Carlo; ``pi`` is 0 unless the
    instance distribution produces one-token passages.

    Args:
        perturb_width: Perturbation width of the models
        passage_model: The instance distribution
        samples: Monte Carlo sample count
        seed: Seed of the estimate
    """

    def __init__(
        self,
        perturb_width: int = PERTURB_WIDTH,
        passage_model: PassageModel = PassageModel(),
        samples: int = PREFERENCE_SAMPLES,
        seed: int = 0,
    ):
        rng = np.random.default_rng(seed)
        batch = passage_model.sample(rng, samples)
        scores = []
        for _ in range(2):
            starts, ends = predict_spans(0.0, perturb_width, batch, rng)
            scores.append(span_f1_batch(starts, ends, batch.gold_starts, batch.gold_ends))
        first, second = scores
        self.perfect_rate = float(np.mean(np.concatenate(scores) == 1.0))
        # Averaging both directions makes the estimate exactly exchangeable
        self.win_rate = float((np.mean(first > second) + np.mean(second > first)) / 2)
        logger.debug(
            f"Preference model: perfect rate {self.perfect_rate:.4f}, win rate {self.win_rate:.4f}"
        )

    def strict(self, skill_i, skill_j):
        """``P(F1_i > F1_j)``; broadcasts over arrays."""
        skill_i = np.asarray(skill_i, dtype=float)
        skill_j = np.asarray(skill_j, dtype=float)
        return skill_i * (1 - skill_j) * (1 - self.perfect_rate) + (1 - skill_i) * (
            1 - skill_j
        ) * self.win_rate

    def either_preferred(self, skill, degraded_skill):
        """Probability that one of a model's two candidates is strictly preferred over the other."""
        return self.strict(skill, degraded_skill) + self.strict(degraded_skill, skill)

    def tie(self, skill_i, skill_j):
        """Probability that the user has no preference."""
        return 1 - self.strict(skill_i, skill_j) - self.strict(skill_j, skill_i)

    def win_matrix(self, skills: np.ndarray) -> np.ndarray:
        """``P(a > b)`` with ties split evenly, so ``P(a > b) + P(b > a) = 1``.

        Accepts skills of shape ``(K,)`` or ``(T, K)`` and returns ``(K, K)`` or ``(T, K, K)``.
        """
        skills = np.asarray(skills, dtype=float)
        row, col = skills[..., :, None], skills[..., None, :]
        return 0.5 + (self.strict(row, col) - self.strict(col, row)) / 2


def regret_series(
    run: RunRecord, preferences: PreferenceModel, top2_degradation: Optional[float] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Cumulative static and dynamic regret after every step.

    Dueling runs use the strong dueling regret, single-arm runs the bandit regret. With ``top2_degradation`` set,
    a single-arm run was rewarded by top-2 preference feedback and its expected rewards come from
    ``PreferenceModel.either_preferred``.
    """
    if not run.steps:
        return np.zeros(0), np.zeros(0)
    static, dynamic = static_expectations(run), dynamic_expectations(run)
    if run.steps[0].is_duel:
        static_terms = madb_regret_terms(run, preferences.win_matrix(static[0]))
        dynamic_terms = madb_regret_terms(
            run, preferences.win_matrix(dynamic), np.argmax(dynamic, axis=1)
        )
    else:
        if top2_degradation is not None:
            static = preferences.either_preferred(static, static * top2_degradation)
            dynamic = preferences.either_preferred(dynamic, dynamic * top2_degradation)
        static_terms = mab_regret_terms(run, static)
        dynamic_terms = mab_regret_terms(run, dynamic)
    return np.cumsum(static_terms), np.cumsum(dynamic_terms)


def arm_statistics(run: RunRecord) -> Tuple[list, list, dict]:
    """Steps each arm was chosen in, mean granted reward per arm, and steps per chosen pair."""
    chosen = np.zeros(run.num_arms, dtype=np.int64)
    instances = np.zeros(run.num_arms, dtype=np.int64)
    rewards = np.zeros(run.num_arms, dtype=np.int64)
    pairs = Counter()
    for step in run.steps:
        granted = [(step.chosen_i, step.rewards_i)]
        if step.is_duel:
            granted.append((step.chosen_j, step.rewards_j))
            pairs[PairId.of(step.chosen_i, step.chosen_j).label()] += 1
        for arm, arm_rewards in granted:
            chosen[arm] += 1
            instances[arm] += step.batch_size
            rewards[arm] += sum(arm_rewards)
    means = np.divide(rewards, instances, out=np.zeros(run.num_arms), where=instances > 0)
    return chosen.tolist(), [float(m) for m in means], dict(sorted(pairs.items()))


def summarize(
    run: RunRecord, preferences: PreferenceModel, top2_degradation: Optional[float] = None
) -> RunSummary:
    """Per-run summary record."""
    static, dynamic = regret_series(run, preferences, top2_degradation)
    chosen, means, pairs = arm_statistics(run)
    best = run.best_arm if run.best_arm is not None else 0
    skills = run.final_skills or run.initial_skills
    return RunSummary(
        config_digest=run.config_digest,
        policy=run.policy,
        seed=run.seed,
        best_arm=best,
        best_arm_skill=float(skills[best]),
        overall_reward=overall_reward(run),
        static_regret=float(static[-1]) if static.size else 0.0,
        dynamic_regret=float(dynamic[-1]) if dynamic.size else 0.0,
        duration_seconds=float(run.duration),
        chosen_counts=chosen,
        arm_mean_reward=means,
        pair_counts=pairs,
    )
