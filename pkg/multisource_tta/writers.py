#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
"""Persistent run outputs: step and probe CSVs, YAML summaries and the sweep aggregate."""

# System imports
from dataclasses import asdict
from itertools import accumulate
from pathlib import Path
from typing import Callable, List, Sequence, Union

# Third party imports
import pandas as pd
import yaml
from loguru import logger

# Application imports
from multisource_tta.errors import OutputError
from multisource_tta.harness import RunResult, SweepRow, aggregate

AGGREGATE_FILE = "sweep_aggregate.csv"
AGGREGATE_COLUMNS = [
    "parameter",
    "value",
    "runs",
    "mean_best_arm_skill",
    "mean_overall_reward",
    "mean_static_regret",
    "mean_dynamic_regret",
]


def run_name(index: int, result: RunResult) -> str:
    return f"run{index:03d}_{result.record.policy}_seed{result.record.seed}"


def steps_frame(result: RunResult) -> pd.DataFrame:
    """One row per step with rewards, cumulative regrets and the skills at selection time."""
    record = result.record
    steps = record.steps
    static, dynamic = result.regrets
    frame = pd.DataFrame(
        {
            "step": [s.step for s in steps],
            "chosen_i": [s.chosen_i for s in steps],
            "chosen_j": pd.array([s.chosen_j for s in steps], dtype="Int64"),
            "batch_reward_i": [sum(s.rewards_i) for s in steps],
            "batch_reward_j": pd.array(
                [sum(s.rewards_j) if s.is_duel else None for s in steps], dtype="Int64"
            ),
            "cum_reward": list(accumulate(s.reward for s in steps)),
            "static_regret": static if static is not None else [None] * len(steps),
            "dynamic_regret": dynamic if dynamic is not None else [None] * len(steps),
        }
    )
    for arm in range(record.num_arms):
        frame[f"skill_{arm}"] = [s.skills[arm] for s in steps]
    frame["corrupted_count"] = [s.corrupted_count for s in steps]
    return frame


def probes_frame(result: RunResult) -> pd.DataFrame:
    record = result.record
    columns = ["instances_seen"] + [f"f1_{arm}" for arm in range(record.num_arms)]
    rows = [[p.instances_seen, *p.f1] for p in record.probes]
    return pd.DataFrame(rows, columns=columns)


def aggregate_frame(rows: Sequence[SweepRow]) -> pd.DataFrame:
    return pd.DataFrame([asdict(row) for row in rows], columns=AGGREGATE_COLUMNS)


def _write(path: Path, writer: Callable[[Path], None]) -> Path:
    try:
        writer(path)
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e
    logger.debug(f"Wrote {path}")
    return path


def _write_csv(path: Path, frame: pd.DataFrame) -> Path:
    return _write(path, lambda p: frame.to_csv(p, index=False))


def _write_yaml(path: Path, data: dict) -> Path:
    def dump(p: Path):
        with open(p, "w") as f:
            yaml.safe_dump(data, f, sort_keys=False)

    return _write(path, dump)


def write_outputs(
    results: Sequence[RunResult], out_dir: Union[str, Path], parameter: str = "run"
) -> List[Path]:
    """Write every run's step CSV, probe CSV and summary, plus one aggregate CSV.

    Args:
        results: Evaluated runs, in output order
        out_dir: Output folder, created if missing
        parameter: Name of the swept parameter for the aggregate rows

    Returns:
        The written files.

    Raises:
        OutputError: A file or the folder could not be written.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(out_dir, e.strerror or str(e)) from e
    written = []
    for index, result in enumerate(results):
        name = run_name(index, result)
        written.append(_write_csv(out_dir / f"{name}_steps.csv", steps_frame(result)))
        written.append(_write_csv(out_dir / f"{name}_probes.csv", probes_frame(result)))
        written.append(_write_yaml(out_dir / f"{name}_summary.yaml", asdict(result.summary)))
    rows = aggregate(parameter, results)
    written.append(_write_csv(out_dir / AGGREGATE_FILE, aggregate_frame(rows)))
    logger.info(f"Wrote {len(written)} files to {out_dir}")
    return written
