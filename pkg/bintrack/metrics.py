"""Distance, tolerance and pseudo-likelihood used by the ABC samplers."""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from bintrack.model import TargetState

DEFAULT_SIGMA_BEARING = np.pi / 8
DEFAULT_SIGMA_SPEED = 0.5


@dataclass(frozen=True)
class PseudoLikelihoodParams:
    """Spread of the low-manoeuvre kernels on turn angle (radians) and speed change (m/s)."""
    sigma_bearing: float = DEFAULT_SIGMA_BEARING
    sigma_speed: float = DEFAULT_SIGMA_SPEED

    def __post_init__(self):
        if not self.sigma_bearing > 0 or not self.sigma_speed > 0:
            raise ValueError(
                f"Pseudo-likelihood spreads must be strictly positive, "
                f"got sigma_bearing={self.sigma_bearing}, sigma_speed={self.sigma_speed}"
            )

    def dict(self) -> dict:
        return {"sigma_bearing": self.sigma_bearing, "sigma_speed": self.sigma_speed}


def _as_counts(values) -> np.ndarray:
    counts = np.asarray(values)
    if counts.dtype.kind in "iub":
        return counts.astype(np.int64)
    if counts.dtype.kind != "f" or not np.all(np.isfinite(counts)) or np.any(counts != np.round(counts)):
        raise ValueError(f"Count vectors must hold integers, got {counts.tolist()}")
    return counts.astype(np.int64)


def rho(c1, c2) -> float:
    """Squared euclidean distance between two count vectors."""
    c1 = _as_counts(c1)
    c2 = _as_counts(c2)
    if c1.shape != c2.shape:
        raise ValueError(f"Count vectors have different lengths: {c1.shape} != {c2.shape}")
    return float(np.sum((c1 - c2) ** 2))


def distances(counts: np.ndarray, obs) -> np.ndarray:
    """Row-wise ``rho`` between an (n, N_s) batch of counts and one observation."""
    obs = _as_counts(obs)
    if counts.shape[-1] != obs.shape[-1]:
        raise ValueError(f"Count vectors have different lengths: {counts.shape[-1]} != {obs.shape[-1]}")
    return np.sum((counts - obs) ** 2, axis=-1).astype(float)


def tune_epsilon(n_sensors: int, n_targets: int, p_e: float) -> float:
    """Tolerance matching the expected per-sensor count error ``p_e * N_t``.

    Without sensor errors any tolerance at or below 1 only accepts exact
    matches of integer counts, so 1 is returned.
    """
    if p_e == 0:
        return 1.0
    return n_sensors * (p_e * n_targets) ** 2


def tune_epsilon_to_rate(
    pilot_rho,
    target_rate: float,
    rate_of: Optional[Callable[[float], float]] = None,
) -> float:
    """Tolerance whose acceptance rate on a pilot batch is closest to ``target_rate``.

    Distances between count vectors are integers, so the candidates are the
    distinct pilot distances plus one half: candidate ``d + 0.5`` admits every
    pilot proposal at distance d or less.

    Args:
        pilot_rho: distances of the pilot proposals to the observation.
        target_rate: wanted acceptance rate, in (0, 1).
        rate_of: acceptance rate reached with a given tolerance, nondecreasing
            in the tolerance. Defaults to the share of pilot distances below it.

    Returns:
        The candidate with the closest rate, the smaller one on ties. When no
        candidate reaches the target the largest one is returned.
    """
    if not 0 < target_rate < 1:
        raise ValueError(f"target_rate must be in (0, 1), got {target_rate}")
    pilot_rho = np.asarray(pilot_rho, dtype=float)
    if not len(pilot_rho):
        raise ValueError("The pilot batch is empty")

    candidates = np.unique(pilot_rho) + 0.5
    if rate_of is None:
        def rate_of(epsilon: float) -> float:
            return float(np.mean(pilot_rho < epsilon))

    rates: dict[int, float] = {}

    def rate(k: int) -> float:
        if k not in rates:
            rates[k] = rate_of(float(candidates[k]))
        return rates[k]

    lo, hi = 0, len(candidates) - 1
    if rate(hi) < target_rate:
        return float(candidates[hi])
    # First candidate reaching the target
    while lo < hi:
        mid = (lo + hi) // 2
        if rate(mid) >= target_rate:
            hi = mid
        else:
            lo = mid + 1

    if lo > 0 and target_rate - rate(lo - 1) <= rate(lo) - target_rate:
        lo -= 1
    return float(candidates[lo])


def _turn_angles(velocities: np.ndarray, previous: np.ndarray) -> np.ndarray:
    cross = previous[..., 0] * velocities[..., 1] - previous[..., 1] * velocities[..., 0]
    dot = np.sum(previous * velocities, axis=-1)
    angles = np.arctan2(cross, dot)
    # arctan2 can return -pi for a reversal, the interval is (-pi, pi]
    angles = np.where(angles == -np.pi, np.pi, angles)

    defined = np.any(velocities, axis=-1) & np.any(previous, axis=-1)
    return np.where(defined, angles, 0.0)


def log_pseudo_likelihood(
    velocities: np.ndarray,
    previous_velocities: np.ndarray,
    params: PseudoLikelihoodParams,
) -> np.ndarray:
    """Log of the pseudo-likelihood for a batch of proposals.

    Args:
        velocities: (..., N_t, 2) proposed velocities.
        previous_velocities: (N_t, 2) reference velocities.
        params: kernel spreads.

    Returns:
        Array of log values with the leading batch shape, each <= 0.
    """
    velocities = np.asarray(velocities, dtype=float)
    previous = np.broadcast_to(np.asarray(previous_velocities, dtype=float), velocities.shape)

    turn = _turn_angles(velocities, previous)
    speed_change = np.linalg.norm(velocities, axis=-1) - np.linalg.norm(previous, axis=-1)

    log_f = -(turn ** 2) / (2 * params.sigma_bearing ** 2) - speed_change ** 2 / (2 * params.sigma_speed ** 2)
    return log_f.sum(axis=-1)


def pseudo_likelihood(
    proposed: TargetState,
    previous: TargetState,
    params: PseudoLikelihoodParams,
) -> float:
    """Low-manoeuvre score in (0, 1], equal to 1 when no velocity changed."""
    if proposed.n_targets != previous.n_targets:
        raise ValueError(
            f"States disagree on the target count: {proposed.n_targets} != {previous.n_targets}"
        )
    return float(np.exp(log_pseudo_likelihood(proposed.velocities, previous.velocities, params)))
