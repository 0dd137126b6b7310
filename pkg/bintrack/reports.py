"""Delimited text outputs for tracking runs and experiments."""
import math
import os
from typing import Optional

import numpy as np
import pandas as pd
from jinja2 import Template

from bintrack.evaluation import RmseReport
from bintrack.inference import TrackStep

FLOAT_FORMAT = "%.6f"
NA = "NA"

templates_dir = os.path.join(os.path.dirname(__file__), "templates")


def _write_frame(frame: pd.DataFrame, path: str, header: str):
    with open(path, "w") as f:
        f.write(header)
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, na_rep=NA, lineterminator="\n")


def _state_columns(positions: np.ndarray, velocities: np.ndarray) -> dict[str, np.ndarray]:
    columns = {}
    for j in range(positions.shape[1]):
        columns[f"x{j}"] = positions[:, j, 0]
        columns[f"y{j}"] = positions[:, j, 1]
        columns[f"vx{j}"] = velocities[:, j, 0]
        columns[f"vy{j}"] = velocities[:, j, 1]
    return columns


def estimates_frame(results: list[TrackStep]) -> pd.DataFrame:
    rows = []
    for particle_set, estimate in results:
        state = estimate.state
        for j in range(state.n_targets):
            rows.append({
                "t": particle_set.timestep,
                "target": j,
                "x": state.positions[j, 0],
                "y": state.positions[j, 1],
                "vx": state.velocities[j, 0],
                "vy": state.velocities[j, 1],
                "acceptance_rate": particle_set.acceptance_rate,
                "fallback": int(estimate.fallback),
            })
    return pd.DataFrame(rows)


def particle_log_frame(results: list[TrackStep]) -> pd.DataFrame:
    """One row per proposal with its acceptance flag, distance and pseudo-likelihood."""
    frames = []
    for particle_set, _ in results:
        log = particle_set.proposals
        frames.append(pd.DataFrame({
            "timestep": particle_set.timestep,
            "chain": log.chain,
            "index": log.index,
            "accepted": log.accepted.astype(int),
            **_state_columns(log.positions, log.velocities),
            "rho": log.rho,
            "f": np.exp(log.log_f),
        }))
    return pd.concat(frames, ignore_index=True)


def swap_log_frame(results: list[TrackStep]) -> pd.DataFrame:
    return pd.DataFrame([
        {
            "timestep": particle_set.timestep,
            "iteration": swap.iteration,
            "cold": swap.cold,
            "hot": swap.hot,
            "hot_state": swap.hot_state,
            "rho_hot": swap.rho_hot,
            "epsilon_cold": swap.epsilon_cold,
            "accepted": int(swap.accepted),
        }
        for particle_set, _ in results
        for swap in particle_set.swaps
    ])


def write_estimates(results: list[TrackStep], path: str, header: str):
    _write_frame(estimates_frame(results), path, header)


def write_particle_log(results: list[TrackStep], path: str, header: str) -> Optional[str]:
    """Writes the particle log, plus a ``.swaps.csv`` sibling when the run recorded swaps."""
    _write_frame(particle_log_frame(results), path, header)

    swaps = swap_log_frame(results)
    if swaps.empty:
        return None
    swap_path = f"{os.path.splitext(path)[0]}.swaps.csv"
    _write_frame(swaps, swap_path, header)
    return swap_path


def summary_frame(reports: list[RmseReport]) -> pd.DataFrame:
    return pd.DataFrame([
        {
            "algorithm": report.algorithm.value,
            "n_targets": report.n_targets,
            "n_sensors": report.n_sensors,
            "t": checkpoint.t,
            "n_reps": report.n_reps,
            "n_failed": report.n_failed,
            "rmse": checkpoint.rmse,
            "rmse_sd": checkpoint.std_dev,
            "rmse_se": checkpoint.std_err,
            "mse": checkpoint.mse,
            "mse_ci_low": checkpoint.mse_ci_low,
            "mse_ci_high": checkpoint.mse_ci_high,
        }
        for report in reports
        for checkpoint in report.checkpoints
    ])


def long_frame(reports: list[RmseReport]) -> pd.DataFrame:
    return pd.DataFrame([
        {
            "algorithm": run.algorithm,
            "n_targets": run.n_targets,
            "n_sensors": run.n_sensors,
            "rep": run.rep,
            "scenario_seed": run.scenario_seed,
            "sampler_seed": run.sampler_seed,
            "t": run.t,
            "rmse": run.rmse,
            "error": run.error,
        }
        for report in reports
        for run in report.runs
    ])


def _cell(value: float, spread: float) -> str:
    if math.isnan(value):
        return NA
    spread_str = NA if math.isnan(spread) else f"{spread:.2f}"
    return f"{value:.2f} ({spread_str})"


def render_table(reports: list[RmseReport]) -> str:
    """Text table with one row per (N_t, t) and one column per (N_s, algorithm)."""
    with open(os.path.join(templates_dir, "rmse_table.j2")) as f:
        template = Template(f.read())

    by_cell = {(r.n_targets, r.n_sensors, r.algorithm): r for r in reports}
    n_targets = sorted({r.n_targets for r in reports})
    n_sensors = sorted({r.n_sensors for r in reports})
    algorithms = list(dict.fromkeys(r.algorithm for r in reports))
    checkpoints = sorted({c.t for r in reports for c in r.checkpoints})

    rows = []
    for nt in n_targets:
        for t in checkpoints:
            cells = []
            for ns in n_sensors:
                for algorithm in algorithms:
                    report = by_cell.get((nt, ns, algorithm))
                    checkpoint = next((c for c in report.checkpoints if c.t == t), None) if report else None
                    cells.append(_cell(checkpoint.rmse, checkpoint.std_dev) if checkpoint else NA)
            rows.append({"n_targets": nt, "t": t, "cells": cells})

    notes = [
        f"{r.algorithm.value} N_t={r.n_targets} N_s={r.n_sensors}: {r.n_failed} failed replicate(s)"
        for r in reports
        if r.n_failed
    ]
    return template.render(
        columns=[f"{ns}:{algorithm.value}" for ns in n_sensors for algorithm in algorithms],
        rows=rows,
        notes=notes,
    )


def write_experiment(reports: list[RmseReport], output_dir: str, header: str) -> dict[str, str]:
    os.makedirs(output_dir, exist_ok=True)
    paths = {
        "table": os.path.join(output_dir, "rmse_table.txt"),
        "summary": os.path.join(output_dir, "rmse_summary.csv"),
        "long": os.path.join(output_dir, "rmse_long.csv"),
    }
    with open(paths["table"], "w") as f:
        f.write(header)
        f.write(render_table(reports))
    _write_frame(summary_frame(reports), paths["summary"], header)
    _write_frame(long_frame(reports), paths["long"], header)
    return paths
