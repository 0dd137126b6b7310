import dataclasses
import multiprocessing
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment

from bintrack.config import CPU_COUNT, Algorithm, ConfigError, ExperimentConfig, RunConfig
from bintrack.inference import Estimate, track
from bintrack.logger import logger
from bintrack.model import TargetState
from bintrack.simulate import make_scenario
from bintrack.utils import derive_seed


@dataclass(frozen=True)
class Checkpoint:
    t: int
    rmse: float
    std_dev: float
    std_err: float
    mse: float
    mse_ci_low: float
    mse_ci_high: float


@dataclass(frozen=True)
class RunRecord:
    """RMSE of one replicate at one checkpoint, or the failure that stopped it."""
    algorithm: str
    n_targets: int
    n_sensors: int
    rep: int
    scenario_seed: int
    sampler_seed: int
    t: Optional[int]
    rmse: Optional[float]
    error: Optional[str] = None


@dataclass
class RmseReport:
    algorithm: Algorithm
    n_targets: int
    n_sensors: int
    checkpoints: list[Checkpoint]
    n_reps: int
    n_failed: int = 0
    runs: list[RunRecord] = field(default_factory=list)


def position_rmse(estimates: list[Estimate], truth: list[TargetState], t: int) -> float:
    """Position RMSE at timestep t (counted from 1) after optimal target matching.

    Estimated targets carry no identity, so they are assigned to true targets
    by minimizing the summed squared distance.
    """
    estimate = estimates[t - 1].state
    actual = truth[t - 1]
    if estimate.n_targets != actual.n_targets:
        raise ValueError(
            f"Estimate has {estimate.n_targets} targets, truth has {actual.n_targets}"
        )

    offsets = estimate.positions[:, np.newaxis, :] - actual.positions[np.newaxis, :, :]
    cost = np.sum(offsets ** 2, axis=-1)
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].sum() / actual.n_targets))


@dataclass(frozen=True)
class ReplicateTask:
    config: RunConfig
    algorithm: Algorithm
    n_targets: int
    n_sensors: int
    rep: int
    scenario_seed: int
    sampler_seed: int
    checkpoints: tuple[int, ...]


def run_replicate(task: ReplicateTask) -> list[RunRecord]:
    """Simulates one scenario, tracks it and scores every checkpoint."""
    base = dict(
        algorithm=task.algorithm.value,
        n_targets=task.n_targets,
        n_sensors=task.n_sensors,
        rep=task.rep,
        scenario_seed=task.scenario_seed,
        sampler_seed=task.sampler_seed,
    )
    config = task.config
    try:
        net = config.sensors.build(config.seed, count=task.n_sensors)
        scenario = make_scenario(
            task.n_targets,
            net,
            config.scenario.motion,
            config.scenario.duration,
            task.scenario_seed,
            initial_radius=config.scenario.initial_radius,
            initial_speed=config.scenario.initial_speed,
        )
        sampler = dataclasses.replace(config.sampler, seed=task.sampler_seed)
        estimates = [estimate for _, estimate in track(scenario, task.algorithm, sampler)]
    except Exception as err:
        logger.error("Replicate failed", error=str(err), **base)
        return [RunRecord(t=None, rmse=None, error=f"{type(err).__name__}: {err}", **base)]

    return [
        RunRecord(t=t, rmse=position_rmse(estimates, scenario.truth, t), **base)
        for t in task.checkpoints
    ]


def _summarize(values: np.ndarray, t: int) -> Checkpoint:
    n = len(values)
    if n == 0:
        return Checkpoint(t, *([float("nan")] * 6))

    squared = values ** 2
    std_dev = float(np.std(values, ddof=1)) if n > 1 else float("nan")
    mse_sd = float(np.std(squared, ddof=1)) if n > 1 else float("nan")
    mse = float(np.mean(squared))
    half_width = 1.96 * mse_sd / np.sqrt(n)
    return Checkpoint(
        t=t,
        rmse=float(np.mean(values)),
        std_dev=std_dev,
        std_err=std_dev / np.sqrt(n),
        mse=mse,
        mse_ci_low=mse - half_width,
        mse_ci_high=mse + half_width,
    )


def build_report(
    algorithm: Algorithm,
    n_targets: int,
    n_sensors: int,
    records: list[RunRecord],
    checkpoints: list[int],
) -> RmseReport:
    frame = pd.DataFrame([dataclasses.asdict(r) for r in records])
    failed_reps = set(frame.loc[frame["error"].notna(), "rep"])
    scored = frame[~frame["rep"].isin(failed_reps)].sort_values(["rep", "t"])

    return RmseReport(
        algorithm=algorithm,
        n_targets=n_targets,
        n_sensors=n_sensors,
        checkpoints=[
            _summarize(scored.loc[scored["t"] == t, "rmse"].to_numpy(dtype=float), t)
            for t in checkpoints
        ],
        n_reps=int(scored["rep"].nunique()),
        n_failed=len(failed_reps),
        runs=records,
    )


def run_experiment(
    grid: ExperimentConfig,
    n_reps: int,
    base_cfg: RunConfig,
    seed: int,
    workers: Optional[int] = None,
) -> list[RmseReport]:
    """Monte Carlo RMSE over every (N_t, N_s, algorithm) cell of the grid.

    Replicate ``rep`` of a (N_t, N_s) pair sees the same scenario under every
    algorithm. Seeds derive from ``seed`` alone, so the reports do not depend
    on the number of workers.
    """
    if n_reps < 1:
        raise ConfigError("experiment.n_reps", "must be at least 1")
    if grid.checkpoints and max(grid.checkpoints) > base_cfg.scenario.duration:
        raise ConfigError(
            "experiment.checkpoints",
            f"{max(grid.checkpoints)} is past the scenario duration {base_cfg.scenario.duration}",
        )

    if Algorithm.MCMC in grid.algorithms and any(n != 1 for n in grid.n_targets):
        raise ConfigError("experiment.algorithms", "mcmc only supports n_targets = [1]")

    algorithm_ids = {algorithm: i for i, algorithm in enumerate(Algorithm)}
    checkpoints = tuple(grid.checkpoints)
    cells = [
        (n_targets, n_sensors, algorithm)
        for n_targets in grid.n_targets
        for n_sensors in grid.n_sensors
        for algorithm in grid.algorithms
    ]
    tasks = {
        cell: [
            ReplicateTask(
                config=base_cfg,
                algorithm=cell[2],
                n_targets=cell[0],
                n_sensors=cell[1],
                rep=rep,
                scenario_seed=derive_seed(seed, cell[0], cell[1], rep),
                sampler_seed=derive_seed(seed, cell[0], cell[1], rep, algorithm_ids[cell[2]] + 1),
                checkpoints=checkpoints,
            )
            for rep in range(n_reps)
        ]
        for cell in cells
    }

    workers = workers or grid.workers or CPU_COUNT
    logger.info("Starting experiment", cells=len(cells), n_reps=n_reps, workers=workers)

    if workers == 1:
        results = {cell: [run_replicate(task) for task in cell_tasks] for cell, cell_tasks in tasks.items()}
    else:
        with multiprocessing.Pool(workers) as pool:
            pending = {
                cell: [pool.apply_async(run_replicate, (task,)) for task in cell_tasks]
                for cell, cell_tasks in tasks.items()
            }
            results = {cell: [result.get() for result in cell_results] for cell, cell_results in pending.items()}

    reports = []
    for (n_targets, n_sensors, algorithm), replicate_records in results.items():
        records = [record for records in replicate_records for record in records]
        report = build_report(algorithm, n_targets, n_sensors, records, list(checkpoints))
        if report.n_failed:
            logger.warning(
                "Cell finished with failed replicates",
                algorithm=algorithm.value,
                n_targets=n_targets,
                n_sensors=n_sensors,
                failed=report.n_failed,
            )
        logger.info(
            "Cell finished",
            algorithm=algorithm.value,
            n_targets=n_targets,
            n_sensors=n_sensors,
            n_reps=report.n_reps,
        )
        reports.append(report)

    return reports
