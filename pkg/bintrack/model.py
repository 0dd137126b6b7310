"""Binary directional sensor observation model.

A sensor located at ``l`` reports 1 for a target at ``x`` moving with velocity
``v`` when ``<x - l, v> < 0`` (the target is getting closer) and 0 otherwise.
Sensors cannot tell targets apart, so the observation at a timestep is the
per-sensor count of approaching targets.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import numpy.typing as npt

from bintrack.logger import logger

BinaryMatrix = npt.NDArray[np.int8]
CountVector = npt.NDArray[np.int64]


def _as_points(values, name: str) -> np.ndarray:
    points = np.array(values, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError(f"{name} must be a list of 2-D points, got shape {points.shape}")
    if not np.all(np.isfinite(points)):
        raise ValueError(f"{name} must be finite")
    points.setflags(write=False)
    return points


@dataclass(frozen=True, eq=False)
class TargetState:
    """Positions (meters) and velocities (meters/second) of every target at one timestep."""
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        positions = _as_points(self.positions, "positions")
        velocities = _as_points(self.velocities, "velocities")
        if len(positions) < 1:
            raise ValueError("A TargetState needs at least one target")
        if positions.shape != velocities.shape:
            raise ValueError(
                f"positions and velocities disagree on the target count: "
                f"{len(positions)} != {len(velocities)}"
            )
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "velocities", velocities)

    @property
    def n_targets(self) -> int:
        return len(self.positions)

    def permuted(self, order) -> "TargetState":
        order = np.asarray(order)
        return TargetState(self.positions[order], self.velocities[order])

    def equals(self, other: "TargetState") -> bool:
        return (
            np.array_equal(self.positions, other.positions)
            and np.array_equal(self.velocities, other.velocities)
        )

    def dict(self) -> dict:
        return {
            "positions": self.positions.tolist(),
            "velocities": self.velocities.tolist(),
        }


@dataclass(frozen=True, eq=False)
class SensorNetwork:
    """Fixed sensor locations plus the per-indicator flip probability ``p_e``."""
    locations: np.ndarray
    p_e: float = 0.0

    def __post_init__(self):
        locations = _as_points(self.locations, "locations")
        if len(locations) < 1:
            raise ValueError("A SensorNetwork needs at least one sensor")
        if len(np.unique(locations, axis=0)) != len(locations):
            raise ValueError("Sensor locations must be pairwise distinct")
        if not 0 <= self.p_e < 0.5:
            raise ValueError(f"p_e must be in [0, 0.5), got {self.p_e}")
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "p_e", float(self.p_e))

    @property
    def n_sensors(self) -> int:
        return len(self.locations)

    @classmethod
    def grid(cls, n_sensors: int, extent: float = 50.0, p_e: float = 0.0) -> "SensorNetwork":
        """Square grid covering [-extent, extent]^2, e.g. 4x4 for 16 sensors."""
        side = int(round(np.sqrt(n_sensors)))
        if side * side != n_sensors:
            raise ValueError(f"A grid layout needs a square sensor count, got {n_sensors}")
        if side == 1:
            return cls(np.zeros((1, 2)), p_e)

        axis = np.linspace(-extent, extent, side)
        xs, ys = np.meshgrid(axis, axis)
        return cls(np.column_stack([xs.ravel(), ys.ravel()]), p_e)

    @classmethod
    def uniform_random(
        cls,
        n_sensors: int,
        extent: float = 50.0,
        p_e: float = 0.0,
        rng: Optional[np.random.Generator] = None,
    ) -> "SensorNetwork":
        rng = rng or np.random.default_rng()
        return cls(rng.uniform(-extent, extent, size=(n_sensors, 2)), p_e)

    def dict(self) -> dict:
        return {"locations": self.locations.tolist(), "p_e": self.p_e}


def indicator(position, velocity, sensor) -> int:
    """Returns 1 when the target is getting closer to the sensor, else 0.

    The inequality is strict, so an inner product of exactly zero (including a
    zero velocity) reads as moving away.
    """
    velocity = np.asarray(velocity, dtype=float)
    if not np.any(velocity):
        logger.debug("Zero velocity treated as moving away", position=list(map(float, position)))
        return 0

    inner = float(np.dot(np.asarray(position, dtype=float) - np.asarray(sensor, dtype=float), velocity))
    return int(inner < 0)


def binary_matrix(state: TargetState, net: SensorNetwork) -> BinaryMatrix:
    """Noiseless N_s x N_t matrix, entry (i, j) is the indicator of target j at sensor i."""
    if not np.all(np.any(state.velocities, axis=1)):
        logger.debug("Zero velocity treated as moving away", velocities=state.velocities.tolist())

    offsets = state.positions[np.newaxis, :, :] - net.locations[:, np.newaxis, :]
    inner = np.einsum("ijk,jk->ij", offsets, state.velocities)
    return (inner < 0).astype(np.int8)


def count_vector(matrix: BinaryMatrix) -> CountVector:
    """Per-sensor number of approaching targets (row sums)."""
    return np.asarray(matrix, dtype=np.int64).sum(axis=1)


def count_vectors(positions: np.ndarray, velocities: np.ndarray, locations: np.ndarray) -> np.ndarray:
    """Batch observation model.

    Args:
        positions: (n, N_t, 2) particle positions.
        velocities: (n, N_t, 2) particle velocities.
        locations: (N_s, 2) sensor locations.

    Returns:
        (n, N_s) integer counts, row k equal to
        ``count_vector(binary_matrix(particle_k, net))``.
    """
    offsets = positions[:, np.newaxis, :, :] - locations[np.newaxis, :, np.newaxis, :]
    inner = np.einsum("nijk,njk->nij", offsets, velocities)
    return (inner < 0).sum(axis=2, dtype=np.int64)


def corrupt(matrix: BinaryMatrix, p_e: float, rng: np.random.Generator) -> BinaryMatrix:
    """Flips every entry independently with probability ``p_e``."""
    if not 0 <= p_e <= 1:
        raise ValueError(f"p_e must be a probability, got {p_e}")

    matrix = np.asarray(matrix, dtype=np.int8)
    flips = rng.random(matrix.shape) < p_e
    return matrix ^ flips.astype(np.int8)
