import dataclasses
import os
from datetime import datetime
from typing import Optional

import click

from bintrack.config import Algorithm, ConfigError, RunConfig, SamplerConfig
from bintrack.config_wizard import ConfigWizard
from bintrack.evaluation import run_experiment
from bintrack.inference import ModelScopeError, track
from bintrack.logger import logger
from bintrack.reports import write_estimates, write_experiment, write_particle_log
from bintrack.simulate import Scenario, make_scenario
from bintrack.utils import format_header


def _fail(message: str, err: Exception):
    logger.error(message, error=str(err))
    raise click.ClickException(f"{message}: {err}") from err


def _load_config(path: str, seed: Optional[int]) -> RunConfig:
    try:
        config = RunConfig.load(path)
    except (ConfigError, OSError) as err:
        _fail("Unable to load config", err)
    return config if seed is None else config.with_seed(seed)


@click.group()
def cli():
    pass


@cli.command()
@click.option(
    '--config',
    help='The path of the config file that will be updated/created.',
)
def setup(config):
    ConfigWizard.cli_start(config)


@cli.command()
@click.option('--config', help='The path of the run config.', required=True)
@click.option('--seed', type=int, help='Overrides the seed set in the config.', required=False)
@click.option(
    '--out',
    help='Where the scenario JSON will be written. Defaults to <output_dir>/scenario.json.',
    required=False,
)
def simulate(config: str, seed: int = None, out: str = None):
    run_config = _load_config(config, seed)
    out = out or os.path.join(run_config.output_dir, "scenario.json")

    try:
        net = run_config.sensors.build(run_config.seed)
        scenario = make_scenario(
            run_config.scenario.n_targets,
            net,
            run_config.scenario.motion,
            run_config.scenario.duration,
            run_config.seed,
            initial_radius=run_config.scenario.initial_radius,
            initial_speed=run_config.scenario.initial_speed,
            metadata={"config_hash": run_config.config_hash},
        )
    except (ConfigError, ValueError) as err:
        _fail("Unable to simulate scenario", err)

    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    scenario.write(out)
    logger.info("Scenario written", path=out)
    click.echo(
        f"N_t={scenario.n_targets} N_s={net.n_sensors} T={scenario.duration} "
        f"seed={scenario.seed} -> {out}"
    )


@cli.command(name="track")
@click.option('--scenario', 'scenario_path', help='A scenario JSON written by simulate.', required=True)
@click.option(
    '--algorithm',
    type=click.Choice([a.value for a in Algorithm]),
    help='The sampler used at every timestep.',
    required=True,
)
@click.option(
    '--config',
    help='Run config providing the sampler settings. Sampler defaults are used when omitted.',
    required=False,
)
@click.option('--seed', type=int, help='Sampler seed. Defaults to the config seed, then the scenario seed.')
@click.option('--out', help='Estimates CSV. Defaults to <output_dir>/estimates.csv.', required=False)
@click.option('--particle-log', help='Optional CSV with every proposal of every timestep.', required=False)
def track_command(
    scenario_path: str,
    algorithm: str,
    config: str = None,
    seed: int = None,
    out: str = None,
    particle_log: str = None,
):
    try:
        scenario = Scenario.load(scenario_path)
    except (OSError, ValueError, KeyError) as err:
        _fail("Unable to load scenario", err)

    if config:
        run_config = _load_config(config, None)
        sampler = run_config.sampler
        output_dir = run_config.output_dir
        config_hash = run_config.config_hash
    else:
        sampler = SamplerConfig(seed=scenario.seed)
        output_dir = "bintrack_output"
        config_hash = None
    if seed is not None:
        sampler = dataclasses.replace(sampler, seed=seed)

    algorithm = Algorithm(algorithm)
    start_time = datetime.now()
    try:
        results = track(scenario, algorithm, sampler)
    except (ConfigError, ModelScopeError) as err:
        _fail("Unable to track scenario", err)

    out = out or os.path.join(output_dir, "estimates.csv")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    header = format_header(
        "track",
        algorithm=algorithm.value,
        scenario_seed=scenario.seed,
        seed=sampler.seed,
        config_hash=config_hash,
    )
    write_estimates(results, out, header)
    if particle_log:
        os.makedirs(os.path.dirname(particle_log) or ".", exist_ok=True)
        swap_path = write_particle_log(results, particle_log, header)
        logger.info("Particle log written", path=particle_log, swaps=swap_path)

    logger.info(
        "Tracking completed",
        algorithm=algorithm.value,
        elapsed=str(datetime.now() - start_time),
        path=out,
    )


@cli.command()
@click.option('--config', help='The path of the run config.', required=True)
@click.option('--seed', type=int, help='Overrides the seed set in the config.', required=False)
@click.option('--out', help='Output directory. Defaults to output_dir from the config.', required=False)
@click.option('--workers', type=int, help='Worker processes. Results do not depend on this.', required=False)
@click.option('--n-reps', type=int, help='Overrides experiment.n_reps.', required=False)
def experiment(config: str, seed: int = None, out: str = None, workers: int = None, n_reps: int = None):
    run_config = _load_config(config, seed)
    grid = run_config.experiment
    out = out or run_config.output_dir

    start_time = datetime.now()
    try:
        if Algorithm.ABC_PT in grid.algorithms:
            run_config.sampler.resolve(max(grid.n_sensors), max(grid.n_targets), run_config.sensors.p_e).validate_ladder()
        reports = run_experiment(grid, n_reps or grid.n_reps, run_config, run_config.seed, workers=workers)
    except (ConfigError, ModelScopeError) as err:
        _fail("Unable to run experiment", err)

    header = format_header("experiment", seed=run_config.seed, config_hash=run_config.config_hash)
    paths = write_experiment(reports, out, header)
    logger.info(
        "Experiment completed",
        elapsed=str(datetime.now() - start_time),
        **paths,
    )
    with open(paths["table"]) as f:
        click.echo(f.read())


if __name__ == '__main__':
    cli()
