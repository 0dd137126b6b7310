from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import orjson

from bintrack.logger import logger
from bintrack.model import (
    CountVector,
    SensorNetwork,
    TargetState,
    binary_matrix,
    corrupt,
    count_vector,
)

SCENARIO_FORMAT_VERSION = 1


@dataclass(frozen=True)
class MotionParams:
    """Nearly constant velocity model with F = I and Q = sigma2 * I."""
    sigma2: float
    dt: float = 1.0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be strictly positive, got {self.sigma2}")
        if self.dt != 1.0:
            raise ValueError("Only a unit timestep is supported")

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))


def propagate(state: TargetState, motion: MotionParams, rng: np.random.Generator) -> TargetState:
    """One step of the motion model.

    The new position uses the old velocity. The new velocity is the old one
    plus isotropic Gaussian noise, independently per target.
    """
    positions = state.positions + state.velocities
    velocities = state.velocities + rng.normal(scale=motion.sigma, size=state.velocities.shape)
    return TargetState(positions, velocities)


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    motion_seq, observation_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(motion_seq), np.random.default_rng(observation_seq)


def observe(truth: list[TargetState], net: SensorNetwork, seed: int) -> list[CountVector]:
    """Noisy count vectors for a trajectory, drawn from the observation stream of ``seed``."""
    _, rng = _streams(seed)
    return [
        count_vector(corrupt(binary_matrix(state, net), net.p_e, rng))
        for state in truth
    ]


@dataclass(eq=False)
class Scenario:
    net: SensorNetwork
    motion: MotionParams
    truth: list[TargetState]
    observations: list[CountVector]
    seed: int
    initial_radius: float = 40.0
    initial_speed: float = 2.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.truth) != len(self.observations):
            raise ValueError(
                f"truth and observations disagree on the duration: "
                f"{len(self.truth)} != {len(self.observations)}"
            )
        if not self.truth:
            raise ValueError("A scenario needs at least one timestep")
        if len({state.n_targets for state in self.truth}) != 1:
            raise ValueError("Every timestep must hold the same number of targets")
        self.observations = [np.asarray(obs, dtype=np.int64) for obs in self.observations]

    @property
    def duration(self) -> int:
        return len(self.truth)

    @property
    def n_targets(self) -> int:
        return self.truth[0].n_targets

    def truth_at(self, t: int) -> TargetState:
        """Ground truth at timestep t, counted from 1."""
        return self.truth[t - 1]

    def dict(self) -> dict:
        return {
            "format_version": SCENARIO_FORMAT_VERSION,
            "seed": self.seed,
            "n_targets": self.n_targets,
            "duration": self.duration,
            "initial_radius": self.initial_radius,
            "initial_speed": self.initial_speed,
            "motion": {"sigma2": self.motion.sigma2, "dt": self.motion.dt},
            "sensors": self.net.dict(),
            "metadata": self.metadata,
            "truth": [state.dict() for state in self.truth],
            "observations": [obs.tolist() for obs in self.observations],
        }

    def write(self, path: str):
        with open(path, "wb") as f:
            f.write(orjson.dumps(self.dict(), option=orjson.OPT_INDENT_2))

    @classmethod
    def load(cls, path: str) -> "Scenario":
        with open(path, "rb") as f:
            data = orjson.loads(f.read())

        if data.get("format_version") != SCENARIO_FORMAT_VERSION:
            raise ValueError(f"Unsupported scenario format: {data.get('format_version')}")

        return cls(
            net=SensorNetwork(**data["sensors"]),
            motion=MotionParams(**data["motion"]),
            truth=[TargetState(**state) for state in data["truth"]],
            observations=data["observations"],
            seed=data["seed"],
            initial_radius=data["initial_radius"],
            initial_speed=data["initial_speed"],
            metadata=data.get("metadata") or {},
        )


def initial_state(
    n_targets: int,
    rng: np.random.Generator,
    radius: float = 40.0,
    speed: float = 2.0,
) -> TargetState:
    """Targets spread uniformly on a circle centred on the origin, all heading for the centre."""
    angles = rng.uniform(0.0, 2 * np.pi, size=n_targets)
    directions = np.column_stack([np.cos(angles), np.sin(angles)])
    return TargetState(radius * directions, -speed * directions)


def make_scenario(
    n_targets: int,
    net: SensorNetwork,
    motion: MotionParams,
    duration: int,
    seed: int,
    initial_radius: float = 40.0,
    initial_speed: float = 2.0,
    metadata: Optional[dict] = None,
) -> Scenario:
    """Ground truth trajectories plus noisy observations, fully determined by ``seed``."""
    if n_targets < 1:
        raise ValueError(f"n_targets must be at least 1, got {n_targets}")
    if duration < 1:
        raise ValueError(f"duration must be at least 1, got {duration}")

    motion_rng, _ = _streams(seed)
    truth = [initial_state(n_targets, motion_rng, initial_radius, initial_speed)]
    for _ in range(duration - 1):
        truth.append(propagate(truth[-1], motion, motion_rng))

    logger.debug(
        "Generated scenario",
        n_targets=n_targets,
        n_sensors=net.n_sensors,
        duration=duration,
        seed=seed,
    )
    return Scenario(
        net=net,
        motion=motion,
        truth=truth,
        observations=observe(truth, net, seed),
        seed=seed,
        initial_radius=initial_radius,
        initial_speed=initial_speed,
        metadata=metadata or {},
    )
