import dataclasses
import os
import sys
from typing import Callable, Optional

import click
import questionary

from bintrack.config import (
    AUTO,
    AUTO_RATE,
    Algorithm,
    ConfigError,
    EstimateMode,
    RunConfig,
    SensorLayout,
)


def _ask_number(message: str, default, cast: Callable = float):
    answer = questionary.text(
        message=message,
        default=str(default),
        validate=lambda text: _is_number(text, cast) or f"Expected a {cast.__name__}",
    ).ask()
    if answer is None:
        raise KeyboardInterrupt
    return cast(answer)


def _is_number(text: str, cast: Callable) -> bool:
    try:
        cast(text)
    except ValueError:
        return False
    return True


def _parse_epsilon(text: str):
    text = text.strip()
    return text if text in (AUTO, AUTO_RATE) else float(text)


def _is_epsilon(text: str) -> bool:
    try:
        epsilon = _parse_epsilon(text)
    except ValueError:
        return False
    return isinstance(epsilon, str) or epsilon >= 0


def _parse_list(text: str, cast: Callable) -> list:
    return [cast(item) for item in text.replace(" ", "").replace("\n", "").split(",") if item]


class ConfigWizard:

    def __init__(self, config: RunConfig):
        self.config = config

    def _apply(self, section: str, **changes):
        """Rebuilds a config section so the usual validation runs on the new values."""
        current = getattr(self.config, section)
        try:
            setattr(self.config, section, dataclasses.replace(current, **changes))
        except ConfigError as err:
            click.echo(f"Config not updated: {err}\n")
            return
        self.config.write()
        click.echo("Config updated successfully.\n")

    def update_scenario(self):
        """Config wizard prompt for the simulated scenario."""
        scenario = self.config.scenario
        click.echo("Targets start on a circle around the origin and head for its centre.")
        self._apply(
            "scenario",
            sigma2=_ask_number("Process noise variance sigma2?", scenario.sigma2),
            n_targets=_ask_number("Number of targets?", scenario.n_targets, int),
            duration=_ask_number("Number of timesteps?", scenario.duration, int),
            initial_radius=_ask_number("Radius of the start circle (m)?", scenario.initial_radius),
            initial_speed=_ask_number("Initial speed (m/s)?", scenario.initial_speed),
        )

    def update_sensors(self):
        """Config wizard prompt for the sensor network."""
        sensors = self.config.sensors
        layout = questionary.select(
            "Sensor layout?",
            choices=[layout.value for layout in SensorLayout],
            default=sensors.layout.value,
        ).ask()
        self._apply(
            "sensors",
            layout=layout,
            count=_ask_number("Number of sensors?", sensors.count, int),
            extent=_ask_number("Half width of the surveyed square (m)?", sensors.extent),
            p_e=_ask_number("Sensor flip probability p_e?", sensors.p_e),
            locations=None,
        )

    def update_sampler(self):
        """Config wizard prompt for the sampler settings shared by every algorithm."""
        sampler = self.config.sampler
        epsilon = questionary.text(
            message=(
                f"Tolerance epsilon? '{AUTO}' derives it from p_e, "
                f"'{AUTO_RATE}' tunes it per step toward a target acceptance rate."
            ),
            default=str(sampler.epsilon),
            validate=lambda text: _is_epsilon(text) or f"Expected '{AUTO}', '{AUTO_RATE}' or a non-negative number",
        ).ask()
        if epsilon is None:
            raise KeyboardInterrupt
        target_acceptance = sampler.target_acceptance
        if _parse_epsilon(epsilon) == AUTO_RATE:
            target_acceptance = _ask_number("Target acceptance rate?", sampler.target_acceptance)
        estimator = questionary.select(
            "Point estimate?",
            choices=[mode.value for mode in EstimateMode],
            default=sampler.estimator.value,
        ).ask()
        self._apply(
            "sampler",
            n_particles=_ask_number("Proposals per timestep?", sampler.n_particles, int),
            epsilon=_parse_epsilon(epsilon),
            target_acceptance=target_acceptance,
            n_chains=_ask_number("Parallel tempering chains?", sampler.n_chains, int),
            ladder_ratio=_ask_number("Ratio between neighbouring tolerances?", sampler.ladder_ratio),
            burn_in=_ask_number("Burn-in fraction of each chain?", sampler.burn_in),
            estimator=estimator,
        )

    def update_experiment(self):
        """Config wizard prompt for the Monte Carlo grid."""
        grid = self.config.experiment
        algorithms = questionary.checkbox(
            "Algorithms to compare?",
            choices=[
                questionary.Choice(a.value, checked=a in grid.algorithms)
                for a in Algorithm
            ],
        ).ask()
        n_targets = questionary.text(
            message="Comma separated target counts.",
            default=", ".join(str(n) for n in grid.n_targets),
        ).ask()
        n_sensors = questionary.text(
            message="Comma separated sensor counts.",
            default=", ".join(str(n) for n in grid.n_sensors),
        ).ask()
        checkpoints = questionary.text(
            message="Comma separated timesteps at which the RMSE is reported.",
            default=", ".join(str(t) for t in grid.checkpoints),
        ).ask()
        try:
            changes = dict(
                algorithms=algorithms,
                n_targets=_parse_list(n_targets, int),
                n_sensors=_parse_list(n_sensors, int),
                checkpoints=_parse_list(checkpoints, int),
            )
        except ValueError as err:
            click.echo(f"Config not updated: {err}\n")
            return
        changes["n_reps"] = _ask_number("Replicates per cell?", grid.n_reps, int)
        self._apply("experiment", **changes)

    def update_output_dir(self):
        """Config wizard prompt to update the output_dir attr in the config
        """
        config = self.config
        user_selection = questionary.text(
            message="Directory where scenarios, estimates and reports will be written.",
            default=config.output_dir
        ).ask()
        config.output_dir = user_selection.strip()
        config.write()
        click.echo("Config updated successfully.\n")

    @classmethod
    def cli_start(cls, config_path: Optional[str] = None):
        choice_map = {
            "Set the simulated scenario.": "update_scenario",
            "Set the sensor network.": "update_sensors",
            "Set the sampler settings.": "update_sampler",
            "Set the experiment grid.": "update_experiment",
            "Set the output directory.": "update_output_dir",
        }
        if not config_path:
            config_path = questionary.text(
                message="What is the path of the config file, including the file name?",
            ).ask()
            if not config_path:
                sys.exit(0)

        if os.path.exists(config_path):
            config = RunConfig.load(config_path)
        else:
            click.echo(
                "It doesn't look like this config exists yet. "
                "Let me get a bit more information."
            )
            config = RunConfig(
                path=config_path,
                seed=_ask_number("Master seed?", 0, int),
                scenario={"sigma2": _ask_number("Process noise variance sigma2?", 0.1)},
            )
            config.write()

        # Adding here to ensure it is the last option in the list
        choice_map["Done."] = "exit"
        config_builder = cls(config)
        while True:
            try:
                user_selection = questionary.select(
                    message="What would you like to do next?",
                    choices=list(choice_map.keys()),
                ).ask()
                if user_selection == "Done.":
                    sys.exit(0)

                getattr(config_builder, choice_map[user_selection])()

            except (KeyError, KeyboardInterrupt, TypeError):
                sys.exit(0)
