import dataclasses
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Union

import numpy as np
import yaml

from bintrack.metrics import PseudoLikelihoodParams, tune_epsilon
from bintrack.model import SensorNetwork
from bintrack.simulate import MotionParams
from bintrack.utils import get_config_hash

CPU_COUNT = max(os.cpu_count() - 2, 2)

AUTO = "auto"
AUTO_RATE = "auto-rate"


class ConfigError(ValueError):
    """Raised for malformed configs. ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"Invalid config key '{key}': {message}")


class Algorithm(Enum):
    ABC_REJ = "abc-rej"
    ABC_RW = "abc-rw"
    ABC_PT = "abc-pt"
    MCMC = "mcmc"


class EstimateMode(Enum):
    POSTERIOR_MEAN = "posterior-mean"
    MAP = "map"


class SensorLayout(Enum):
    GRID = "grid"
    RANDOM = "random"


def _check_keys(cls, values: dict, section: str):
    if not isinstance(values, dict):
        raise ConfigError(section or "<root>", f"expected a mapping, got {type(values).__name__}")

    allowed = {f.name for f in dataclasses.fields(cls) if not f.name.startswith("_")}
    for key in values:
        if key not in allowed:
            raise ConfigError(f"{section}.{key}" if section else key, "unknown key")


def _require(values: dict, key: str, section: str):
    if not isinstance(values, dict):
        raise ConfigError(section, f"expected a mapping, got {type(values).__name__}")
    if values.get(key) is None:
        raise ConfigError(f"{section}.{key}" if section else key, "missing required key")


def _build(cls, values: Optional[dict], section: str):
    values = {} if values is None else values
    _check_keys(cls, values, section)
    try:
        return cls(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(section, str(err)) from err


@dataclass
class ScenarioConfig:
    sigma2: float = None
    n_targets: int = 2
    duration: int = 30
    initial_radius: float = 40.0
    initial_speed: float = 2.0

    def __post_init__(self):
        if self.sigma2 is None:
            raise ConfigError("scenario.sigma2", "missing required key")
        if self.n_targets < 1:
            raise ConfigError("scenario.n_targets", "must be at least 1")
        if self.duration < 1:
            raise ConfigError("scenario.duration", "must be at least 1")

    @property
    def motion(self) -> MotionParams:
        try:
            return MotionParams(sigma2=float(self.sigma2))
        except ValueError as err:
            raise ConfigError("scenario.sigma2", str(err)) from err

    def dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class SensorConfig:
    count: int = 64
    layout: Union[SensorLayout, str] = SensorLayout.GRID
    extent: float = 50.0
    p_e: float = 0.0
    locations: Optional[list[list[float]]] = None

    def __post_init__(self):
        try:
            self.layout = SensorLayout(self.layout)
        except ValueError as err:
            raise ConfigError("sensors.layout", str(err)) from err
        if not 0 <= self.p_e < 0.5:
            raise ConfigError("sensors.p_e", f"must be in [0, 0.5), got {self.p_e}")
        if self.locations is not None:
            self.count = len(self.locations)

    def build(self, seed: int, count: Optional[int] = None) -> SensorNetwork:
        """Builds the network, ``count`` overrides the configured sensor count (experiment grids)."""
        count = count or self.count
        try:
            if self.locations is not None and count == len(self.locations):
                return SensorNetwork(self.locations, self.p_e)
            if self.layout == SensorLayout.GRID:
                return SensorNetwork.grid(count, self.extent, self.p_e)
            rng = np.random.default_rng(np.random.SeedSequence([seed, count]))
            return SensorNetwork.uniform_random(count, self.extent, self.p_e, rng)
        except ValueError as err:
            raise ConfigError("sensors", str(err)) from err

    def dict(self) -> dict:
        response = dataclasses.asdict(self)
        response["layout"] = self.layout.value
        if self.locations is None:
            del response["locations"]
        return response


@dataclass
class SamplerConfig:
    """Settings shared by every sampler. PT-only entries are ignored elsewhere.

    ``epsilon`` is a number, ``auto`` for the closed-form tolerance, or
    ``auto-rate``: the chain samplers then pick a tolerance at every timestep
    from a pilot batch of ``pilot_size`` proposals so that their acceptance
    rate comes close to ``target_acceptance``. ABC-Rej has no chain to tune and
    keeps the closed-form tolerance.
    """
    n_particles: int = 300
    epsilon: Union[float, str] = AUTO
    target_acceptance: float = 0.23
    pilot_size: int = 500
    pseudo: PseudoLikelihoodParams = field(default_factory=PseudoLikelihoodParams)
    n_chains: int = 5
    epsilon_ladder: Optional[list[float]] = None
    ladder_ratio: float = 2.0
    swap_pairs_per_sweep: Optional[int] = None
    burn_in: float = 0.5
    estimator: Union[EstimateMode, str] = EstimateMode.POSTERIOR_MEAN
    init_radius: float = 10.0
    init_velocity_sd: float = 0.5
    seed: Optional[int] = None

    def __post_init__(self):
        if isinstance(self.pseudo, dict):
            _check_keys(PseudoLikelihoodParams, self.pseudo, "sampler.pseudo")
            try:
                self.pseudo = PseudoLikelihoodParams(**self.pseudo)
            except ValueError as err:
                raise ConfigError("sampler.pseudo", str(err)) from err
        try:
            self.estimator = EstimateMode(self.estimator)
        except ValueError as err:
            raise ConfigError("sampler.estimator", str(err)) from err

        if self.n_particles < 1:
            raise ConfigError("sampler.n_particles", "must be at least 1")
        if self.epsilon not in (AUTO, AUTO_RATE) and (isinstance(self.epsilon, str) or self.epsilon < 0):
            raise ConfigError(
                "sampler.epsilon",
                f"must be '{AUTO}', '{AUTO_RATE}' or a non-negative number, got {self.epsilon}",
            )
        if not 0 < self.target_acceptance < 1:
            raise ConfigError("sampler.target_acceptance", "must be in (0, 1)")
        if self.pilot_size < 1:
            raise ConfigError("sampler.pilot_size", "must be at least 1")
        if self.tuned_per_step and self.epsilon_ladder is not None:
            raise ConfigError(
                "sampler.epsilon_ladder",
                f"is derived from ladder_ratio at every step when epsilon is '{AUTO_RATE}'",
            )
        if not 0 <= self.burn_in < 1:
            raise ConfigError("sampler.burn_in", "must be in [0, 1)")
        if self.ladder_ratio <= 1:
            raise ConfigError("sampler.ladder_ratio", "must be greater than 1")
        if self.init_radius < 0 or self.init_velocity_sd <= 0:
            raise ConfigError("sampler", "init_radius must be >= 0 and init_velocity_sd > 0")

    @property
    def n_burn_in(self) -> int:
        return int(self.n_particles * self.burn_in)

    @property
    def tuned_per_step(self) -> bool:
        return self.epsilon == AUTO_RATE

    def with_epsilon(self, epsilon: float) -> "SamplerConfig":
        """Copy with a numeric epsilon and the geometric ladder starting from it."""
        epsilon = float(epsilon)
        ladder = [epsilon * self.ladder_ratio ** k for k in range(self.n_chains)]
        return dataclasses.replace(self, epsilon=epsilon, epsilon_ladder=ladder)

    def resolve(self, n_sensors: int, n_targets: int, p_e: float) -> "SamplerConfig":
        """Returns a copy with a numeric epsilon and a materialized PT ladder.

        A config tuned per step comes back unchanged.
        """
        if self.tuned_per_step:
            return dataclasses.replace(self)
        epsilon = tune_epsilon(n_sensors, n_targets, p_e) if self.epsilon == AUTO else float(self.epsilon)
        if self.epsilon_ladder is None:
            return self.with_epsilon(epsilon)

        ladder = [float(e) for e in self.epsilon_ladder]
        # The first rung is the tolerance itself, written out by hand it can be off by rounding
        if ladder and math.isclose(ladder[0], epsilon):
            ladder[0] = epsilon
        return dataclasses.replace(self, epsilon=epsilon, epsilon_ladder=ladder)

    def validate_ladder(self):
        """Checks the PT ladder of a resolved config."""
        ladder = self.epsilon_ladder
        if self.n_chains < 2:
            raise ConfigError("sampler.n_chains", "parallel tempering needs at least 2 chains")
        if self.tuned_per_step:
            self._validate_swap_pairs()
            return
        if ladder is None or len(ladder) != self.n_chains:
            raise ConfigError(
                "sampler.epsilon_ladder",
                f"needs one tolerance per chain ({self.n_chains}), got {0 if ladder is None else len(ladder)}",
            )
        if any(lo >= hi for lo, hi in zip(ladder, ladder[1:])):
            raise ConfigError("sampler.epsilon_ladder", f"must be strictly increasing, got {ladder}")
        if self.epsilon != AUTO and not math.isclose(ladder[0], self.epsilon):
            raise ConfigError(
                "sampler.epsilon_ladder",
                f"first tolerance {ladder[0]} must equal epsilon {self.epsilon}",
            )
        self._validate_swap_pairs()

    def _validate_swap_pairs(self):
        if self.swap_pairs_per_sweep is not None and not 1 <= self.swap_pairs_per_sweep <= self.n_chains - 1:
            raise ConfigError("sampler.swap_pairs_per_sweep", f"must be in [1, {self.n_chains - 1}]")

    def dict(self) -> dict:
        response = dataclasses.asdict(self)
        response["pseudo"] = self.pseudo.dict()
        response["estimator"] = self.estimator.value
        return {k: v for k, v in response.items() if v is not None}


@dataclass
class ExperimentConfig:
    n_targets: list[int] = field(default_factory=lambda: [2, 3, 4])
    n_sensors: list[int] = field(default_factory=lambda: [16, 64])
    algorithms: list[Union[Algorithm, str]] = field(
        default_factory=lambda: [Algorithm.ABC_REJ, Algorithm.ABC_RW, Algorithm.ABC_PT]
    )
    n_reps: int = 100
    checkpoints: list[int] = field(default_factory=lambda: [10, 20, 30])
    workers: Optional[int] = None

    def __post_init__(self):
        try:
            self.algorithms = [Algorithm(a) for a in self.algorithms]
        except ValueError as err:
            raise ConfigError("experiment.algorithms", str(err)) from err
        if self.n_reps < 1:
            raise ConfigError("experiment.n_reps", "must be at least 1")
        self.checkpoints = sorted(self.checkpoints)

    def dict(self) -> dict:
        response = dataclasses.asdict(self)
        response["algorithms"] = [a.value for a in self.algorithms]
        return {k: v for k, v in response.items() if v is not None}


@dataclass
class RunConfig:
    path: str
    seed: int = None
    output_dir: str = "bintrack_output"
    scenario: ScenarioConfig = None
    sensors: SensorConfig = None
    sampler: SamplerConfig = None
    experiment: ExperimentConfig = None

    _unversioned_config_attrs = ["path"]

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        with open(path, "r") as f:
            try:
                config_dict = yaml.safe_load(f) or {}
            except yaml.YAMLError as err:
                raise ConfigError("<root>", f"not valid YAML: {err}") from err
        return cls.from_dict(config_dict, path=path)

    @classmethod
    def from_dict(cls, config_dict: dict[str, Any], path: str = "bintrack_config.yaml") -> "RunConfig":
        _check_keys(cls, config_dict, "")
        if "path" in config_dict:
            raise ConfigError("path", "unknown key")
        _require(config_dict, "seed", "")
        _require(config_dict, "scenario", "")
        _require(config_dict["scenario"], "sigma2", "scenario")
        return cls(path=path, **config_dict)

    def __post_init__(self):
        if self.seed is None:
            raise ConfigError("seed", "missing required key")
        if not isinstance(self.seed, int):
            raise ConfigError("seed", f"must be an integer, got {self.seed!r}")

        if not isinstance(self.scenario, ScenarioConfig):
            self.scenario = _build(ScenarioConfig, self.scenario, "scenario")
        if not isinstance(self.sensors, SensorConfig):
            self.sensors = _build(SensorConfig, self.sensors, "sensors")
        if not isinstance(self.sampler, SamplerConfig):
            self.sampler = _build(SamplerConfig, self.sampler, "sampler")
        if not isinstance(self.experiment, ExperimentConfig):
            self.experiment = _build(ExperimentConfig, self.experiment, "experiment")

        if self.sampler.seed is None:
            self.sampler.seed = self.seed

    @property
    def config_hash(self) -> str:
        return get_config_hash(self.dict())

    def with_seed(self, seed: int) -> "RunConfig":
        """Copy with a new master seed, the sampler seed follows unless it was pinned."""
        sampler = self.sampler
        if sampler.seed == self.seed:
            sampler = dataclasses.replace(sampler, seed=seed)
        return dataclasses.replace(self, seed=seed, sampler=sampler)

    def dict(self) -> dict:
        return {
            "seed": self.seed,
            "output_dir": self.output_dir,
            "scenario": self.scenario.dict(),
            "sensors": self.sensors.dict(),
            "sampler": self.sampler.dict(),
            "experiment": self.experiment.dict(),
        }

    def write(self):
        with open(self.path, "w") as f:
            yaml.dump(self.dict(), f, indent=2, sort_keys=False)
