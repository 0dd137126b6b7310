import os

import pytest

from bintrack.config import (
    AUTO,
    AUTO_RATE,
    Algorithm,
    ConfigError,
    EstimateMode,
    RunConfig,
    SamplerConfig,
    SensorLayout,
)
from test.conftest import get_config_dict, write_config


def test_minimal_config_uses_defaults():
    config = RunConfig.from_dict({"seed": 1, "scenario": {"sigma2": 0.1}})

    assert config.scenario.duration == 30
    assert config.scenario.n_targets == 2
    assert config.sensors.count == 64
    assert config.sensors.layout == SensorLayout.GRID
    assert config.sampler.epsilon == AUTO
    assert config.sampler.estimator == EstimateMode.POSTERIOR_MEAN
    assert config.sampler.seed == 1
    assert config.experiment.algorithms == [Algorithm.ABC_REJ, Algorithm.ABC_RW, Algorithm.ABC_PT]


@pytest.mark.parametrize(
    "config_dict, key",
    [
        ({"seed": 1, "scenario": {}}, "scenario.sigma2"),
        ({"seed": 1}, "scenario"),
        ({"scenario": {"sigma2": 0.1}}, "seed"),
        ({"seed": 1, "scenario": {"sigma2": 0.1}, "sampler": {"n_particle": 10}}, "sampler.n_particle"),
        ({"seed": 1, "scenario": {"sigma2": 0.1}, "colour": "blue"}, "colour"),
        ({"seed": 1, "scenario": {"sigma2": 0.1}, "sensors": {"p_e": 0.7}}, "sensors.p_e"),
        ({"seed": 1, "scenario": {"sigma2": 0.1}, "sampler": {"estimator": "median"}}, "sampler.estimator"),
        ({"seed": 1, "scenario": {"sigma2": 0.1}, "experiment": {"algorithms": ["smc"]}}, "experiment.algorithms"),
        ({"seed": "one", "scenario": {"sigma2": 0.1}}, "seed"),
        ({"seed": 1, "scenario": {"sigma2": 0.1}, "sampler": {"epsilon": "tight"}}, "sampler.epsilon"),
        ({"seed": 1, "scenario": {"sigma2": 0.1}, "sampler": {"target_acceptance": 1.0}}, "sampler.target_acceptance"),
        ({"seed": 1, "scenario": {"sigma2": 0.1}, "sampler": {"pilot_size": 0}}, "sampler.pilot_size"),
        (
            {"seed": 1, "scenario": {"sigma2": 0.1}, "sampler": {"epsilon": "auto-rate", "epsilon_ladder": [1.0, 2.0]}},
            "sampler.epsilon_ladder",
        ),
    ],
)
def test_config_errors_name_the_key(config_dict, key):
    with pytest.raises(ConfigError) as err:
        RunConfig.from_dict(config_dict)
    assert err.value.key == key
    assert key in str(err.value)


def test_sigma2_must_be_positive():
    config = RunConfig.from_dict({"seed": 1, "scenario": {"sigma2": -0.1}})
    with pytest.raises(ConfigError, match="sigma2"):
        config.scenario.motion


def test_sampler_resolve_tunes_epsilon():
    resolved = SamplerConfig(n_chains=4).resolve(n_sensors=64, n_targets=2, p_e=0.05)

    assert resolved.epsilon == pytest.approx(0.64)
    assert resolved.epsilon_ladder == pytest.approx([0.64, 1.28, 2.56, 5.12])
    resolved.validate_ladder()


def test_sampler_resolve_keeps_explicit_values():
    resolved = SamplerConfig(epsilon=2.0, n_chains=2, epsilon_ladder=[2.0, 3.0]).resolve(16, 2, 0.1)

    assert resolved.epsilon == 2.0
    assert resolved.epsilon_ladder == [2.0, 3.0]


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_chains": 3, "epsilon_ladder": [1.0, 2.0]},
        {"n_chains": 3, "epsilon_ladder": [1.0, 2.0, 2.0]},
        {"n_chains": 2, "epsilon_ladder": [1.0, 2.0], "swap_pairs_per_sweep": 2},
    ],
)
def test_validate_ladder(kwargs):
    with pytest.raises(ConfigError):
        SamplerConfig(epsilon=1.0, **kwargs).validate_ladder()


def test_resolve_pins_a_rounded_first_rung_to_epsilon():
    resolved = SamplerConfig(n_chains=3, epsilon_ladder=[0.64, 1.28, 2.56]).resolve(64, 2, 0.05)

    assert resolved.epsilon_ladder[0] == resolved.epsilon
    assert resolved.epsilon_ladder[1:] == [1.28, 2.56]
    resolved.validate_ladder()


def test_resolve_leaves_a_tuned_config_alone():
    cfg = SamplerConfig(epsilon=AUTO_RATE, n_chains=3)
    resolved = cfg.resolve(64, 2, 0.05)

    assert resolved == cfg
    assert resolved is not cfg
    assert resolved.tuned_per_step
    resolved.validate_ladder()


def test_with_epsilon_builds_the_geometric_ladder():
    tuned = SamplerConfig(epsilon=AUTO_RATE, n_chains=3, ladder_ratio=3.0).with_epsilon(2.5)

    assert tuned.epsilon == 2.5
    assert tuned.epsilon_ladder == [2.5, 7.5, 22.5]
    assert not tuned.tuned_per_step
    tuned.validate_ladder()


def test_burn_in():
    assert SamplerConfig(n_particles=300).n_burn_in == 150
    with pytest.raises(ConfigError, match="burn_in"):
        SamplerConfig(burn_in=1.0)


def test_pseudo_section_from_dict():
    config = RunConfig.from_dict({
        "seed": 1,
        "scenario": {"sigma2": 0.1},
        "sampler": {"pseudo": {"sigma_bearing": 0.2, "sigma_speed": 1.0}},
    })
    assert config.sampler.pseudo.sigma_bearing == 0.2

    with pytest.raises(ConfigError, match="sampler.pseudo.kappa"):
        RunConfig.from_dict({"seed": 1, "scenario": {"sigma2": 0.1}, "sampler": {"pseudo": {"kappa": 1}}})


def test_sensor_build():
    config = RunConfig.from_dict(get_config_dict(sensors={"layout": "random", "count": 10}))

    a = config.sensors.build(config.seed)
    b = config.sensors.build(config.seed)
    assert a.n_sensors == 10
    assert (a.locations == b.locations).all()
    assert config.sensors.build(config.seed, count=12).n_sensors == 12


def test_explicit_sensor_locations():
    config = RunConfig.from_dict(get_config_dict(sensors={"locations": [[0, 0], [5, 5], [-5, 5]]}))

    assert config.sensors.count == 3
    assert config.sensors.build(config.seed).n_sensors == 3


def test_experiment_checkpoints_are_sorted():
    config = RunConfig.from_dict(get_config_dict(experiment={"checkpoints": [5, 1, 3]}))
    assert config.experiment.checkpoints == [1, 3, 5]


def test_config_hash():
    a = RunConfig.from_dict(get_config_dict())
    b = RunConfig.from_dict(get_config_dict())

    assert a.config_hash == b.config_hash
    assert a.with_seed(8).config_hash != a.config_hash


def test_with_seed_moves_an_unpinned_sampler_seed():
    config = RunConfig.from_dict(get_config_dict())
    assert config.with_seed(8).sampler.seed == 8

    pinned = RunConfig.from_dict(get_config_dict(sampler={"seed": 100}))
    assert pinned.with_seed(8).sampler.seed == 100
    assert pinned.with_seed(8).seed == 8


def test_write_and_load(tmp_path):
    path = write_config(tmp_path, get_config_dict(sampler={"epsilon": 1.5, "estimator": "map"}))
    config = RunConfig.load(path)
    config.write()
    reloaded = RunConfig.load(path)

    assert reloaded.dict() == config.dict()
    assert reloaded.sampler.estimator == EstimateMode.MAP
    assert reloaded.config_hash == config.config_hash


CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


@pytest.mark.parametrize("name", sorted(os.listdir(CONFIG_DIR)))
def test_shipped_configs_load(name):
    config = RunConfig.load(os.path.join(CONFIG_DIR, name))

    config.scenario.motion
    net = config.sensors.build(config.seed)
    sampler = config.sampler.resolve(net.n_sensors, config.scenario.n_targets, net.p_e)
    if Algorithm.ABC_PT in config.experiment.algorithms:
        sampler.validate_ladder()
