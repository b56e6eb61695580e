#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
"""Experiment harness: configuration, the adaptation loops of every policy, and parameter sweeps."""

# System imports
import hashlib
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

# Third party imports
import numpy as np
import yaml
from loguru import logger

# Application imports
from multisource_tta import (
    LEARNING_GAIN,
    PERTURB_WIDTH,
    PREFERENCE_SAMPLES,
    PREFERENCE_SEED_OFFSET,
    PROBE_INTERVAL,
    PROBE_SIZE,
    TOP2_DEGRADATION,
)
from multisource_tta.bandit import MabLedger, best_arm, select_arm, update_binary
from multisource_tta.data_classes import (
    BaseDataClass,
    ProbePoint,
    RunRecord,
    RunSummary,
    StepRecord,
)
from multisource_tta.dueling import (
    DuelLedger,
    best_model,
    check_duel_rewards,
    combine_predictions,
    select_pair,
    update_pair,
)
from multisource_tta.environment import (
    DomainProfile,
    InstanceStream,
    Prober,
    Spans,
    SyntheticModel,
    adapt,
    collaborative_adapt,
    predict_batch,
    predict_top2_batch,
)
from multisource_tta.errors import ConfigError, ContractViolationError
from multisource_tta.feedback import (
    NoiseChannel,
    apply_noise_batch,
    as_prediction,
    exact_match_batch,
    make_preference_batch,
    preference_to_rewards_batch,
    span_f1_batch,
)
from multisource_tta.metrics import PreferenceModel, overall_reward, regret_series, summarize
from multisource_tta.utils.utilities import derive_seed


class PolicyKind(Enum):
    """The model selection policies."""

    UCB = "UCB"
    UCB_PREFERENCE = "UCB_PREFERENCE"
    CO_UCB = "CO_UCB"
    CO_UCB_NO_COLLAB = "CO_UCB_NO_COLLAB"
    BEST_SOURCE = "BEST_SOURCE"
    SINGLE_SOURCE = "SINGLE_SOURCE"

    @property
    def is_dueling(self) -> bool:
        return self in (PolicyKind.CO_UCB, PolicyKind.CO_UCB_NO_COLLAB)

    @property
    def is_fixed(self) -> bool:
        """Baselines that pick one source up front from a held-out probe."""
        return self in (PolicyKind.BEST_SOURCE, PolicyKind.SINGLE_SOURCE)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run.

    Parameters:
        policy: The selection policy
        profile: Source models, stream and seed
        noise: Preference noise channel
        learning_gain: Skill update gain of every model
        perturb_width: Perturbation width of every model
        top2_degradation: Skill factor of a model's second candidate
        policy_only: Update the selection policy but keep the models frozen
        literal_total_count: Reproduce ``N <- |B_t|`` in the dueling ledger
        static_regret: Report regret against initial-skill expectations
        dynamic_regret: Report regret against current-skill expectations
        probe_size: Fresh instances per held-out probe
        probe_interval: Stream instances between probes, 0 disables probing
        preference_samples: Monte Carlo samples of the preference model
    """

    policy: PolicyKind = PolicyKind.CO_UCB
    profile: DomainProfile = field(default_factory=DomainProfile)
    noise: NoiseChannel = field(default_factory=NoiseChannel)
    learning_gain: float = LEARNING_GAIN
    perturb_width: int = PERTURB_WIDTH
    top2_degradation: float = TOP2_DEGRADATION
    policy_only: bool = False
    literal_total_count: bool = False
    static_regret: bool = True
    dynamic_regret: bool = True
    probe_size: int = PROBE_SIZE
    probe_interval: int = PROBE_INTERVAL
    preference_samples: int = PREFERENCE_SAMPLES

    @property
    def num_sources(self) -> int:
        return self.profile.num_models

    @property
    def seed(self) -> int:
        return self.profile.seed

    def validate(self) -> "ExperimentConfig":
        """Raise ``ConfigError`` unless the config can be run."""
        try:
            self.models()
        except ContractViolationError as e:
            raise ConfigError(str(e)) from e
        if self.policy.is_dueling and self.num_sources < 2:
            raise ConfigError(
                f"{self.policy.value} needs at least 2 sources, got {self.num_sources}"
            )
        if self.profile.stream_length < self.profile.batch_size:
            raise ConfigError(
                f"Stream length {self.profile.stream_length} is shorter than one batch "
                f"of {self.profile.batch_size}"
            )
        if self.probe_interval < 0 or (self.probe_interval and self.probe_size < 1):
            raise ConfigError("Probing needs a positive size and a non-negative interval")
        if self.policy.is_fixed and self.probe_size < 1:
            raise ConfigError(f"{self.policy.value} needs a positive probe size")
        if self.preference_samples < 1:
            raise ConfigError("The preference model needs at least one sample")
        return self

    def models(self) -> List[SyntheticModel]:
        return self.profile.models(
            self.learning_gain, self.perturb_width, self.top2_degradation
        )

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, profile=replace(self.profile, seed=int(seed)))

    def to_dict(self) -> Dict[str, Any]:
        """Plain, YAML-safe representation."""
        data = asdict(self)
        data["policy"] = self.policy.value
        data["profile"]["initial_skills"] = list(self.profile.initial_skills)
        data["profile"]["passage_length_range"] = list(self.profile.passage_length_range)
        data["noise"] = {
            "rate": self.noise.noise_rate,
            "corruption": [list(row) for row in self.noise.corruption],
        }
        return data

    def digest(self) -> str:
        """Short content hash of the config."""
        text = yaml.safe_dump(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """Build a config from a (YAML) mapping; unknown keys raise ``ConfigError``."""
        data = dict(data or {})
        try:
            profile = DomainProfile(**_tupled(data.pop("profile", {}) or {}))
            noise_data = dict(data.pop("noise", {}) or {})
            noise_kwargs = {"noise_rate": float(noise_data.pop("rate", 0.0))}
            if "corruption" in noise_data:
                noise_kwargs["corruption"] = tuple(
                    tuple(row) for row in noise_data.pop("corruption")
                )
            if noise_data:
                raise ConfigError(f"Unknown noise settings {sorted(noise_data)}")
            if "policy" in data:
                data["policy"] = PolicyKind(str(data["policy"]).upper())
            return cls(profile=profile, noise=NoiseChannel(**noise_kwargs), **data)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid experiment config: {e}") from e


def _tupled(profile: Dict[str, Any]) -> Dict[str, Any]:
    profile = dict(profile)
    for key in ("initial_skills", "passage_length_range"):
        if key in profile:
            profile[key] = tuple(profile[key])
    return profile


class SweepParameter(Enum):
    NOISE_RATE = "noise_rate"
    NUM_SOURCES = "num_sources"
    SEED = "seed"


@dataclass(frozen=True)
class SweepSpec:
    """One varied parameter and its values.

    Parameters:
        parameter: The parameter to vary
        values: The parameter values, one run (per repeat) each
        repeats: Runs per value with derived seeds
    """

    parameter: SweepParameter
    values: Tuple[Any, ...]
    repeats: int = 1

    def configs(self, base: ExperimentConfig) -> List[Tuple[Any, ExperimentConfig]]:
        """The ``(value, config)`` pairs of the sweep, validated before any run starts."""
        if self.repeats < 1:
            raise ConfigError("A sweep needs at least one repeat per value")
        result = []
        for value in self.values:
            config = self._apply(base, value)
            for repeat in range(self.repeats):
                seeded = config
                if repeat:
                    seeded = config.with_seed(derive_seed(config.seed, ("repeat", repeat)))
                result.append((value, seeded.validate()))
        return result

    def _apply(self, base: ExperimentConfig, value: Any) -> ExperimentConfig:
        try:
            if self.parameter is SweepParameter.NOISE_RATE:
                noise = replace(base.noise, noise_rate=float(value))
                return replace(base, noise=noise)
            if self.parameter is SweepParameter.NUM_SOURCES:
                return replace(base, profile=base.profile.truncated(int(value)))
            return base.with_seed(derive_seed(base.seed, ("seed", value)))
        except (ContractViolationError, ValueError) as e:
            raise ConfigError(f"Invalid {self.parameter.value} {value!r}: {e}") from e


def check_one_hot(
    spans_i: Spans, spans_j: Spans, rewards_i: np.ndarray, rewards_j: np.ndarray
):
    """Per instance, at most one duel member is rewarded and the preferred prediction exists iff one is."""
    check_duel_rewards(rewards_i, rewards_j)
    for k, (r_i, r_j) in enumerate(zip(rewards_i.tolist(), rewards_j.tolist())):
        preferred = combine_predictions(
            as_prediction(spans_i[0][k], spans_i[1][k]),
            as_prediction(spans_j[0][k], spans_j[1][k]),
            r_i,
            r_j,
        )
        if (preferred is not None) != (r_i + r_j == 1):
            raise ContractViolationError(
                f"Instance {k}: preferred prediction {preferred} for rewards ({r_i}, {r_j})"
            )


class _Loop:
    """State of one run: models, random streams and the run record."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        profile = config.profile
        streams = np.random.SeedSequence(profile.seed).spawn(4)
        stream_rng, self.predict_rng, self.noise_rng, probe_rng = (
            np.random.default_rng(s) for s in streams
        )
        self.stream = InstanceStream(
            stream_rng, profile.passage_length_range, profile.max_answer_length
        )
        self.prober = Prober(
            probe_rng,
            max(config.probe_size, 1),
            profile.passage_length_range,
            profile.max_answer_length,
        )
        self.models = config.models()
        self._last_probe = 0
        self.record = RunRecord(
            config.digest(), config.policy.value, profile.seed, profile.initial_skills
        )

    @property
    def skills(self) -> Tuple[float, ...]:
        return tuple(m.skill for m in self.models)

    def adapt(self, arm: int, reward_count: int, batch_size: int):
        if not self.config.policy_only:
            self.models[arm] = adapt(self.models[arm], reward_count, batch_size)

    def probe(self):
        interval = self.config.probe_interval
        seen = self.stream.consumed
        if interval and (seen == 0 or seen // interval > self._last_probe // interval):
            scores = self.prober.score(self.models)
            self.record.probes.append(ProbePoint(seen, scores))
            self._last_probe = seen
            logger.debug(f"Probe after {seen} instances: {scores}")

    def run(self) -> RunRecord:
        start = time.perf_counter()
        self.probe()
        policy = self.config.policy
        if policy.is_dueling:
            self._run_dueling()
        else:
            self._run_single()
        self.record.final_skills = self.skills
        self.record.duration = time.perf_counter() - start
        return self.record

    def _run_single(self):
        config = self.config
        policy = config.policy
        ledger = MabLedger(config.num_sources)
        fixed = self._pick_fixed() if policy.is_fixed else None
        for step in range(1, config.profile.num_steps + 1):
            batch = self.stream.next_batch(config.profile.batch_size)
            skills = self.skills
            arm = fixed if fixed is not None else select_arm(ledger)
            model = self.models[arm]
            corrupted = 0
            if policy is PolicyKind.UCB_PREFERENCE:
                first, second = predict_top2_batch(model, batch, self.predict_rng)
                codes = make_preference_batch(
                    span_f1_batch(*first, batch.gold_starts, batch.gold_ends),
                    span_f1_batch(*second, batch.gold_starts, batch.gold_ends),
                )
                codes, mask = apply_noise_batch(codes, config.noise, self.noise_rng)
                corrupted = int(mask.sum())
                reward_first, reward_second = preference_to_rewards_batch(codes)
                # Either candidate being preferred rewards the model that produced both
                rewards = reward_first + reward_second
            else:
                starts, ends = predict_batch(model, batch, self.predict_rng)
                rewards = exact_match_batch(starts, ends, batch.gold_starts, batch.gold_ends)
            update_binary(ledger, arm, rewards)
            if policy is not PolicyKind.BEST_SOURCE:
                self.adapt(arm, int(rewards.sum()), len(batch))
            self.record.append(
                StepRecord(step, arm, None, tuple(rewards.tolist()), (), len(batch), skills, corrupted)
            )
            self.probe()
        self.record.best_arm = fixed if fixed is not None else best_arm(ledger)

    def _pick_fixed(self) -> int:
        """The source with the best held-out F1 before adaptation."""
        scores = self.prober.score(self.models)
        arm = int(np.argmax(scores))
        logger.debug(f"Held-out F1 before adaptation {scores}, fixed source {arm}")
        return arm

    def _run_dueling(self):
        config = self.config
        collaborative = config.policy is PolicyKind.CO_UCB
        ledger = DuelLedger(
            config.num_sources, accumulate_total=not config.literal_total_count
        )
        for step in range(1, config.profile.num_steps + 1):
            batch = self.stream.next_batch(config.profile.batch_size)
            skills = self.skills
            i, j = select_pair(ledger)
            spans_i = predict_batch(self.models[i], batch, self.predict_rng)
            spans_j = predict_batch(self.models[j], batch, self.predict_rng)
            codes = make_preference_batch(
                span_f1_batch(*spans_i, batch.gold_starts, batch.gold_ends),
                span_f1_batch(*spans_j, batch.gold_starts, batch.gold_ends),
            )
            codes, mask = apply_noise_batch(codes, config.noise, self.noise_rng)
            rewards_i, rewards_j = preference_to_rewards_batch(codes)
            check_one_hot(spans_i, spans_j, rewards_i, rewards_j)
            update_pair(ledger, (i, j), rewards_i, rewards_j)
            if not config.policy_only:
                self.models[i], self.models[j] = collaborative_adapt(
                    self.models[i],
                    self.models[j],
                    rewards_i,
                    rewards_j,
                    len(batch),
                    collaborative,
                )
            self.record.append(
                StepRecord(
                    step,
                    i,
                    j,
                    tuple(rewards_i.tolist()),
                    tuple(rewards_j.tolist()),
                    len(batch),
                    skills,
                    int(mask.sum()),
                )
            )
            self.probe()
        self.record.best_arm = best_model(ledger)


def run_experiment(config: ExperimentConfig) -> RunRecord:
    """Run one policy over the synthetic stream and return the step log with the final best-arm decision."""
    config.validate()
    record = _Loop(config).run()
    logger.info(
        f"{record.policy} seed {record.seed}: best arm {record.best_arm}, overall reward "
        f"{overall_reward(record)}, "
        f"{record.instances} instances in {record.duration:.2f}s"
    )
    return record


def preference_model_for(config: ExperimentConfig) -> PreferenceModel:
    """The preference model used for the regret of runs under ``config``."""
    return PreferenceModel(
        config.perturb_width,
        config.profile.passage_model,
        config.preference_samples,
        config.seed + PREFERENCE_SEED_OFFSET,
    )


@dataclass(eq=False)
class RunResult:
    """A finished run with its config, summary and, for sweeps, the swept value.

    Parameters:
        config: The config the run was made with
        record: The step log
        summary: Regrets, rewards and case-study statistics; disabled regret variants are None
        regrets: Cumulative static and dynamic regret per step
        value: The sweep value of the run, None outside sweeps
    """

    config: ExperimentConfig
    record: RunRecord
    summary: RunSummary
    regrets: Tuple[Optional[np.ndarray], Optional[np.ndarray]]
    value: Any = None


def evaluate(config: ExperimentConfig, record: RunRecord, value: Any = None) -> RunResult:
    """Score a run record under the regret variants enabled in ``config``."""
    preferences = preference_model_for(config)
    degradation = config.top2_degradation if config.policy is PolicyKind.UCB_PREFERENCE else None
    static, dynamic = regret_series(record, preferences, degradation)
    summary = summarize(record, preferences, degradation)
    if not config.static_regret:
        static, summary = None, replace(summary, static_regret=None)
    if not config.dynamic_regret:
        dynamic, summary = None, replace(summary, dynamic_regret=None)
    return RunResult(config, record, summary, (static, dynamic), value)


def run_and_evaluate(config: ExperimentConfig, value: Any = None) -> RunResult:
    return evaluate(config, run_experiment(config), value)


def run_sweep(
    base: ExperimentConfig, sweep: SweepSpec, workers: int = 1
) -> List[RunResult]:
    """Run every point of a sweep.

    Noise-rate and source-count sweeps keep the base seed so runs differ only in the swept parameter; seed sweeps
    derive each seed from the value. Runs are independent and may use a process pool.

    Returns:
        The evaluated runs in sweep order.
    """
    points = sweep.configs(base)
    workers = max(1, int(workers or 1))
    logger.info(
        f"Sweep over {sweep.parameter.value}: {len(points)} runs with {workers} worker(s)"
    )
    values = [value for value, _ in points]
    configs = [config for _, config in points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_and_evaluate, configs, values))
    return [run_and_evaluate(config, value) for config, value in zip(configs, values)]


@dataclass(frozen=True)
class SweepRow(BaseDataClass):
    """Aggregate of the runs of one sweep value."""

    parameter: str = field(metadata={"header": "parameter"})
    value: Any = field(metadata={"header": "value"})
    runs: int = field(metadata={"header": "runs"})
    mean_best_arm_skill: float = field(metadata={"header": "mean_best_arm_skill"})
    mean_overall_reward: float = field(metadata={"header": "mean_overall_reward"})
    mean_static_regret: Optional[float] = field(metadata={"header": "mean_static_regret"})
    mean_dynamic_regret: Optional[float] = field(metadata={"header": "mean_dynamic_regret"})


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def aggregate(parameter: str, results: Sequence[RunResult]) -> List[SweepRow]:
    """One row per sweep value, averaging over its repeats, in first-seen order."""
    grouped: Dict[Any, List[RunSummary]] = {}
    for result in results:
        grouped.setdefault(result.value, []).append(result.summary)
    return [
        SweepRow(
            parameter,
            value,
            len(group),
            float(np.mean([s.best_arm_skill for s in group])),
            float(np.mean([s.overall_reward for s in group])),
            _mean([s.static_regret for s in group]),
            _mean([s.dynamic_regret for s in group]),
        )
        for value, group in grouped.items()
    ]
