import os

import numpy as np
import pytest
import yaml

from bintrack.config import RunConfig, SamplerConfig
from bintrack.inference import Estimate
from bintrack.model import SensorNetwork, TargetState
from bintrack.simulate import MotionParams, make_scenario
from test import SampleGrid

SIGMA2 = 0.01


def get_config_dict(**overrides) -> dict:
    """Small but complete run config, sized for unit tests."""
    config = {
        "seed": 7,
        "scenario": {"sigma2": SIGMA2, "n_targets": 2, "duration": 5},
        "sensors": {"count": 16, "layout": "grid", "extent": 50.0, "p_e": 0.0},
        "sampler": {"n_particles": 60, "n_chains": 3},
        "experiment": {
            "n_targets": [1, 2],
            "n_sensors": [16],
            "algorithms": ["abc-rej", "abc-rw"],
            "n_reps": 2,
            "checkpoints": [3, 5],
        },
    }
    for section, values in overrides.items():
        if isinstance(values, dict) and isinstance(config.get(section), dict):
            config[section] = {**config[section], **values}
        else:
            config[section] = values
    return config


def write_config(tmp_dir, config: dict, name: str = "bintrack_config.yaml") -> str:
    path = os.path.join(tmp_dir, name)
    with open(path, "w") as f:
        yaml.dump(config, f)
    return path


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def motion() -> MotionParams:
    return MotionParams(sigma2=SIGMA2)


@pytest.fixture
def grid_net() -> SensorNetwork:
    return SensorNetwork.grid(SampleGrid.SMALL.value)


@pytest.fixture
def noisy_net() -> SensorNetwork:
    return SensorNetwork.grid(SampleGrid.DENSE.value, p_e=0.05)


@pytest.fixture
def two_targets() -> TargetState:
    return TargetState(
        positions=[[-20.0, 5.0], [15.0, -10.0]],
        velocities=[[1.5, 0.2], [-1.0, 1.2]],
    )


@pytest.fixture
def one_target() -> TargetState:
    return TargetState(positions=[[-12.0, 7.0]], velocities=[[1.2, -0.8]])


@pytest.fixture
def two_target_prev(two_targets) -> Estimate:
    return Estimate(two_targets)


@pytest.fixture
def sampler_cfg() -> SamplerConfig:
    return SamplerConfig(n_particles=400, epsilon=1.0, seed=3)


@pytest.fixture
def scenario(grid_net, motion):
    return make_scenario(2, grid_net, motion, duration=6, seed=11)


@pytest.fixture
def single_target_scenario(motion):
    return make_scenario(1, SensorNetwork.grid(SampleGrid.DENSE.value), motion, duration=4, seed=5)


@pytest.fixture
def run_config(tmp_path) -> RunConfig:
    return RunConfig.load(write_config(tmp_path, get_config_dict()))
