"""Per-timestep samplers and the sequential tracking loop.

Every sampler works on joint particles: one particle holds the state of all
N_t targets, so no explicit data association is ever performed. Proposals are
drawn from the motion prior (an independence proposal) in one vectorized
batch per timestep, which keeps every run a pure function of its seed.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats

from bintrack.config import AUTO, Algorithm, ConfigError, EstimateMode, SamplerConfig
from bintrack.logger import logger
from bintrack.metrics import distances, log_pseudo_likelihood, tune_epsilon, tune_epsilon_to_rate
from bintrack.model import (
    CountVector,
    SensorNetwork,
    TargetState,
    binary_matrix,
    count_vector,
    count_vectors,
)
from bintrack.simulate import MotionParams, Scenario
from bintrack.utils import step_rng


class ModelScopeError(ValueError):
    """The exact likelihood only exists for a single target."""


@dataclass(frozen=True)
class Estimate:
    state: TargetState
    mode: EstimateMode = EstimateMode.POSTERIOR_MEAN
    # Set when nothing was accepted and the prior mean stands in for the posterior
    fallback: bool = False


@dataclass(eq=False)
class ProposalLog:
    """Every proposal drawn during one timestep, in draw order."""
    chain: np.ndarray
    index: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    rho: np.ndarray
    log_f: np.ndarray
    accepted: np.ndarray

    def __len__(self):
        return len(self.index)


@dataclass(frozen=True)
class SwapRecord:
    """One exchange attempt between a colder chain and the next hotter one."""
    iteration: int
    cold: int
    hot: int
    hot_state: int  # flat proposal index held by the hot chain, -1 for the chain seed
    rho_hot: float
    epsilon_cold: float
    accepted: bool


@dataclass(eq=False)
class ParticleSet:
    """Outcome of one sampler step.

    ``positions``/``velocities`` hold the accepted draws. The ``retained_*``
    arrays hold the states the point estimate is computed from: the accepted
    draws for ABC-Rej, the post burn-in chain (holds included) for the MCMC
    samplers.
    """
    timestep: int
    positions: np.ndarray
    velocities: np.ndarray
    proposed_count: int
    accepted_count: int
    retained_positions: np.ndarray
    retained_velocities: np.ndarray
    retained_rho: np.ndarray
    retained_score: np.ndarray
    proposals: ProposalLog
    swaps: list[SwapRecord] = field(default_factory=list)
    chain_rho: Optional[np.ndarray] = None
    # Tolerance of the estimating chain, None for the likelihood baseline
    epsilon: Optional[float] = None

    def __post_init__(self):
        if self.accepted_count != len(self.positions):
            raise ValueError(
                f"accepted_count {self.accepted_count} does not match {len(self.positions)} particles"
            )
        if self.accepted_count > self.proposed_count:
            raise ValueError("More particles accepted than proposed")

    @property
    def acceptance_rate(self) -> float:
        return self.accepted_count / self.proposed_count if self.proposed_count else 0.0

    @property
    def particles(self) -> list[TargetState]:
        return [TargetState(p, v) for p, v in zip(self.positions, self.velocities)]

    @property
    def retained(self) -> list[TargetState]:
        return [TargetState(p, v) for p, v in zip(self.retained_positions, self.retained_velocities)]


class StatePrior:
    """Proposal distribution over joint states."""

    @property
    def mean(self) -> TargetState:
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Returns (n, N_t, 2) positions and velocities."""
        raise NotImplementedError

    def log_density(self, positions: np.ndarray, velocities: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class MotionPrior(StatePrior):
    """One step of the motion model from a previous estimate.

    The position is a deterministic extrapolation, so its point mass is left
    out of the density (it is shared by every proposal).
    """

    def __init__(self, previous: TargetState, motion: MotionParams):
        self.previous = previous
        self.motion = motion

    @property
    def mean(self) -> TargetState:
        return TargetState(self.previous.positions + self.previous.velocities, self.previous.velocities)

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        shape = (n,) + self.previous.velocities.shape
        positions = np.broadcast_to(self.previous.positions + self.previous.velocities, shape).copy()
        velocities = self.previous.velocities + rng.normal(scale=self.motion.sigma, size=shape)
        return positions, velocities

    def log_density(self, positions: np.ndarray, velocities: np.ndarray) -> np.ndarray:
        return stats.norm.logpdf(velocities, loc=self.previous.velocities, scale=self.motion.sigma).sum(axis=(-2, -1))


class InitialPrior(StatePrior):
    """Positions uniform on a disc around each start point, velocities Gaussian."""

    def __init__(self, center: TargetState, radius: float, velocity_sd: float):
        self.center = center
        self.radius = radius
        self.velocity_sd = velocity_sd

    @property
    def mean(self) -> TargetState:
        return self.center

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        shape = (n,) + self.center.positions.shape
        radii = self.radius * np.sqrt(rng.random(shape[:-1]))
        angles = rng.uniform(0.0, 2 * np.pi, size=shape[:-1])
        offsets = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=-1)
        velocities = self.center.velocities + rng.normal(scale=self.velocity_sd, size=shape)
        return self.center.positions + offsets, velocities

    def log_density(self, positions: np.ndarray, velocities: np.ndarray) -> np.ndarray:
        log_velocity = stats.norm.logpdf(
            velocities, loc=self.center.velocities, scale=self.velocity_sd
        ).sum(axis=(-2, -1))
        if self.radius == 0:
            return log_velocity

        offsets = np.linalg.norm(positions - self.center.positions, axis=-1)
        inside = np.all(offsets <= self.radius, axis=-1)
        n_targets = self.center.n_targets
        log_position = np.where(inside, -n_targets * np.log(np.pi * self.radius ** 2), -np.inf)
        return log_velocity + log_position


def prior_sample(prev_estimate: Estimate, motion: MotionParams, rng: np.random.Generator) -> TargetState:
    """Draws one joint state from the motion prior around the previous estimate."""
    positions, velocities = MotionPrior(prev_estimate.state, motion).sample(1, rng)
    return TargetState(positions[0], velocities[0])


def exact_likelihood(obs, state: TargetState, net: SensorNetwork, p_correct: float) -> float:
    """Single-target likelihood of an observation.

    ``p_correct`` is the probability that a sensor reports the right 0-1 value,
    so 1 is a perfect sensor and 0.5 carries no information.
    """
    if state.n_targets != 1:
        raise ModelScopeError(
            f"The exact likelihood is only available for a single target, got {state.n_targets}"
        )
    obs = np.asarray(obs, dtype=np.int64)
    model = count_vector(binary_matrix(state, net))
    if obs.shape != model.shape:
        raise ValueError(f"Observation length {len(obs)} does not match {net.n_sensors} sensors")
    return float(np.prod(np.where(model == obs, p_correct, 1 - p_correct)))


def log_exact_likelihood(counts: np.ndarray, obs, p_correct: float) -> np.ndarray:
    """Batch form of ``exact_likelihood`` over (n, N_s) model counts."""
    matches = counts == np.asarray(obs, dtype=np.int64)
    with np.errstate(divide="ignore"):
        return np.where(matches, np.log(p_correct), np.log1p(-p_correct)).sum(axis=-1)


def mh_accept(log_u: float, new_target: float, new_proposal: float, cur_target: float, cur_proposal: float) -> bool:
    """Metropolis-Hastings test in log space.

    A current state with zero target density is left for any state with
    positive density, and a zero density state is never entered.
    """
    if new_target == -np.inf:
        return False
    if cur_target == -np.inf:
        return True
    log_ratio = (new_target - cur_target) + (cur_proposal - new_proposal)
    return log_ratio >= 0 or log_u <= log_ratio


def metropolis_chain(
    log_target: np.ndarray,
    log_proposal: np.ndarray,
    admissible: np.ndarray,
    log_u: np.ndarray,
    initial_log_target: float,
    initial_log_proposal: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Runs an independence sampler over a pre-drawn proposal stream.

    Args:
        log_target: unnormalized log target density of each proposal.
        log_proposal: log proposal density of each proposal.
        admissible: proposals failing this mask are rejected outright (the ABC test).
        log_u: log of one uniform draw per step.
        initial_log_target: log target of the state the chain starts from.
        initial_log_proposal: log proposal density of that state.

    Returns:
        (indices, accepted): the proposal index held after each step (-1 for the
        starting state) and a mask of the accepted proposals. On rejection the
        chain keeps its current state, so there is always one entry per step.
    """
    n = len(log_target)
    indices = np.empty(n, dtype=np.int64)
    accepted = np.zeros(n, dtype=bool)

    targets = log_target.tolist()
    proposals = log_proposal.tolist()
    admissible = admissible.tolist()
    log_u = log_u.tolist()

    current = -1
    cur_target, cur_proposal = float(initial_log_target), float(initial_log_proposal)
    for i in range(n):
        if admissible[i] and mh_accept(log_u[i], targets[i], proposals[i], cur_target, cur_proposal):
            current, cur_target, cur_proposal = i, targets[i], proposals[i]
            accepted[i] = True
        indices[i] = current

    return indices, accepted


@dataclass(eq=False)
class _Batch:
    positions: np.ndarray
    velocities: np.ndarray
    counts: np.ndarray
    rho: np.ndarray
    log_f: np.ndarray
    log_prior: np.ndarray

    @classmethod
    def evaluate(
        cls,
        positions: np.ndarray,
        velocities: np.ndarray,
        prior: StatePrior,
        obs: np.ndarray,
        net: SensorNetwork,
        reference: TargetState,
        cfg: SamplerConfig,
    ) -> "_Batch":
        counts = count_vectors(positions, velocities, net.locations)
        return cls(
            positions=positions,
            velocities=velocities,
            counts=counts,
            rho=distances(counts, obs),
            log_f=log_pseudo_likelihood(velocities, reference.velocities, cfg.pseudo),
            log_prior=prior.log_density(positions, velocities),
        )

    @classmethod
    def draw(cls, prior, n, rng, obs, net, reference, cfg) -> "_Batch":
        positions, velocities = prior.sample(n, rng)
        return cls.evaluate(positions, velocities, prior, obs, net, reference, cfg)

    @classmethod
    def of_state(cls, state: TargetState, prior, obs, net, reference, cfg) -> "_Batch":
        return cls.evaluate(
            state.positions[np.newaxis], state.velocities[np.newaxis], prior, obs, net, reference, cfg
        )

    def prepend(self, other: "_Batch") -> "_Batch":
        """Concatenation with ``other`` first, so index k of self becomes k + len(other)."""
        return _Batch(*(
            np.concatenate([getattr(other, name), getattr(self, name)])
            for name in ("positions", "velocities", "counts", "rho", "log_f", "log_prior")
        ))


def _resolve(cfg: SamplerConfig, net: SensorNetwork, n_targets: int) -> SamplerConfig:
    if cfg.tuned_per_step:
        return cfg.with_epsilon(tune_epsilon(net.n_sensors, n_targets, net.p_e))
    if cfg.epsilon == AUTO or cfg.epsilon_ladder is None:
        return cfg.resolve(net.n_sensors, n_targets, net.p_e)
    return cfg


def _tune(
    cfg: SamplerConfig,
    pilot_rho: np.ndarray,
    rate_of: Callable[[float], float],
    timestep: int,
    sampler: str,
) -> SamplerConfig:
    epsilon = tune_epsilon_to_rate(pilot_rho, cfg.target_acceptance, rate_of)
    logger.debug(
        "Tuned tolerance on the pilot batch",
        sampler=sampler,
        timestep=timestep,
        epsilon=epsilon,
        pilot_size=len(pilot_rho),
        target=cfg.target_acceptance,
    )
    return cfg.with_epsilon(epsilon)


def _resolve_prior(prev: Estimate, motion: Optional[MotionParams], prior: Optional[StatePrior]) -> StatePrior:
    if prior is not None:
        return prior
    if motion is None:
        raise ValueError("Either a motion model or an explicit prior is required")
    return MotionPrior(prev.state, motion)


def _point_estimate(positions: np.ndarray, velocities: np.ndarray, score: np.ndarray, mode: EstimateMode) -> Estimate:
    if mode == EstimateMode.MAP:
        best = int(np.argmax(score))
        return Estimate(TargetState(positions[best], velocities[best]), mode)
    return Estimate(TargetState(positions.mean(axis=0), velocities.mean(axis=0)), mode)


def _fallback(prior: StatePrior, cfg: SamplerConfig, timestep: int, sampler: str) -> Estimate:
    logger.warning(
        "No particles accepted, using the prior mean",
        sampler=sampler,
        timestep=timestep,
        epsilon=cfg.epsilon,
    )
    return Estimate(prior.mean, cfg.estimator, fallback=True)


def abc_rej_step(
    obs: CountVector,
    prev: Estimate,
    net: SensorNetwork,
    cfg: SamplerConfig,
    rng: np.random.Generator,
    motion: Optional[MotionParams] = None,
    prior: Optional[StatePrior] = None,
    timestep: int = 0,
) -> tuple[ParticleSet, Estimate]:
    """Rejection ABC: keep every proposal whose simulated counts fall within epsilon."""
    obs = np.asarray(obs, dtype=np.int64)
    cfg = _resolve(cfg, net, prev.state.n_targets)
    prior = _resolve_prior(prev, motion, prior)

    n = cfg.n_particles
    batch = _Batch.draw(prior, n, rng, obs, net, prev.state, cfg)
    accepted = batch.rho < cfg.epsilon

    particle_set = ParticleSet(
        timestep=timestep,
        positions=batch.positions[accepted],
        velocities=batch.velocities[accepted],
        proposed_count=n,
        accepted_count=int(accepted.sum()),
        retained_positions=batch.positions[accepted],
        retained_velocities=batch.velocities[accepted],
        retained_rho=batch.rho[accepted],
        retained_score=batch.log_f[accepted],
        proposals=_single_chain_log(batch, accepted),
        epsilon=cfg.epsilon,
    )

    if not particle_set.accepted_count:
        return particle_set, _fallback(prior, cfg, timestep, Algorithm.ABC_REJ.value)

    logger.debug("ABC-Rej step", timestep=timestep, acceptance_rate=particle_set.acceptance_rate)
    return particle_set, _point_estimate(
        particle_set.retained_positions,
        particle_set.retained_velocities,
        particle_set.retained_score,
        cfg.estimator,
    )


def _chain_particle_set(
    batch: _Batch,
    start: _Batch,
    chain: np.ndarray,
    accepted_positions: np.ndarray,
    accepted_velocities: np.ndarray,
    proposals: ProposalLog,
    score: np.ndarray,
    cfg: SamplerConfig,
    timestep: int,
    swaps: Optional[list[SwapRecord]] = None,
    epsilon: Optional[float] = None,
) -> ParticleSet:
    """Packs a chain of flat proposal indices (-1 for the seed) into a ParticleSet.

    ``score`` holds the MAP score of the seed followed by every proposal.
    """
    states = batch.prepend(start)
    held = chain + 1
    kept = held[cfg.n_burn_in:]
    return ParticleSet(
        timestep=timestep,
        positions=accepted_positions,
        velocities=accepted_velocities,
        proposed_count=len(chain),
        accepted_count=len(accepted_positions),
        retained_positions=states.positions[kept],
        retained_velocities=states.velocities[kept],
        retained_rho=states.rho[kept],
        retained_score=score[kept],
        proposals=proposals,
        swaps=swaps or [],
        chain_rho=states.rho[held],
        epsilon=epsilon,
    )


def _chain_estimate(particle_set: ParticleSet, cfg: SamplerConfig, sampler: str) -> Estimate:
    estimate = _point_estimate(
        particle_set.retained_positions,
        particle_set.retained_velocities,
        particle_set.retained_score,
        cfg.estimator,
    )
    if not particle_set.accepted_count:
        logger.warning(
            "No proposal accepted, the chain held its seed",
            sampler=sampler,
            timestep=particle_set.timestep,
            epsilon=cfg.epsilon,
        )
        return Estimate(estimate.state, estimate.mode, fallback=True)

    logger.debug(
        "Chain step",
        sampler=sampler,
        timestep=particle_set.timestep,
        acceptance_rate=particle_set.acceptance_rate,
    )
    return estimate


def _single_chain_log(batch: _Batch, accepted: np.ndarray) -> ProposalLog:
    n = len(accepted)
    return ProposalLog(
        chain=np.zeros(n, dtype=np.int64),
        index=np.arange(n),
        positions=batch.positions,
        velocities=batch.velocities,
        rho=batch.rho,
        log_f=batch.log_f,
        accepted=accepted,
    )


def abc_rw_step(
    obs: CountVector,
    prev: Estimate,
    prev_state_chain: Optional[TargetState],
    net: SensorNetwork,
    cfg: SamplerConfig,
    rng: np.random.Generator,
    motion: Optional[MotionParams] = None,
    prior: Optional[StatePrior] = None,
    timestep: int = 0,
) -> tuple[ParticleSet, Estimate]:
    """ABC-MCMC with the motion prior as independence proposal.

    A proposal is accepted when its counts fall within epsilon and it passes
    the Metropolis-Hastings test on the pseudo-likelihood. The chain starts
    from ``prev_state_chain`` (the noiseless prior mean when not given).
    With ``epsilon: auto-rate`` the tolerance is the one giving this chain
    an acceptance rate closest to the target on a pilot batch.
    """
    obs = np.asarray(obs, dtype=np.int64)
    prior = _resolve_prior(prev, motion, prior)
    start_state = prev_state_chain or prior.mean
    start = _Batch.of_state(start_state, prior, obs, net, prev.state, cfg)

    if cfg.tuned_per_step:
        pilot = _Batch.draw(prior, cfg.pilot_size, rng, obs, net, prev.state, cfg)
        pilot_u = np.log1p(-rng.random(cfg.pilot_size))

        def rate_of(epsilon: float) -> float:
            _, accepted = _rw_chain(pilot, start, pilot_u, epsilon)
            return float(accepted.mean())

        cfg = _tune(cfg, pilot.rho, rate_of, timestep, Algorithm.ABC_RW.value)
    else:
        cfg = _resolve(cfg, net, prev.state.n_targets)

    n = cfg.n_particles
    batch = _Batch.draw(prior, n, rng, obs, net, prev.state, cfg)
    log_u = np.log1p(-rng.random(n))
    chain, accepted = _rw_chain(batch, start, log_u, cfg.epsilon)

    particle_set = _chain_particle_set(
        batch,
        start,
        chain,
        batch.positions[accepted],
        batch.velocities[accepted],
        _single_chain_log(batch, accepted),
        np.concatenate([start.log_f, batch.log_f]),
        cfg,
        timestep,
        epsilon=cfg.epsilon,
    )
    return particle_set, _chain_estimate(particle_set, cfg, Algorithm.ABC_RW.value)


def _rw_chain(batch: _Batch, start: _Batch, log_u: np.ndarray, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    return metropolis_chain(
        log_target=batch.log_f + batch.log_prior,
        log_proposal=batch.log_prior,
        admissible=batch.rho < epsilon,
        log_u=log_u,
        initial_log_target=start.log_f[0] + start.log_prior[0],
        initial_log_proposal=start.log_prior[0],
    )


def _swap_pairs(n_chains: int, n_pairs: int, rng: np.random.Generator) -> list[int]:
    # Adjacent pairs (k, k + 1) identified by their colder member, in random order
    return rng.permutation(n_chains - 1)[:n_pairs].tolist()


@dataclass(eq=False)
class _Tempering:
    target_chain: np.ndarray
    entered: np.ndarray
    local_accepted: np.ndarray
    swaps: list[SwapRecord]


def _temper(
    states: _Batch,
    n: int,
    ladder: list[float],
    log_u: list[list[float]],
    swap_orders: list[list[int]],
) -> _Tempering:
    """Runs every chain over its share of ``states``, the seed state first.

    Flat index 1 + k * n + i of ``states`` is the proposal of chain k at
    iteration i.
    """
    n_chains = len(ladder)
    rho = states.rho.tolist()
    log_target = (states.log_f + states.log_prior).tolist()
    log_proposal = states.log_prior.tolist()

    current = [0] * n_chains
    local_accepted = np.zeros((n_chains, n), dtype=bool)
    target_chain = np.empty(n, dtype=np.int64)
    entered = np.zeros(n, dtype=bool)
    swaps: list[SwapRecord] = []

    for i in range(n):
        before = current[0]
        for k in range(n_chains):
            j = 1 + k * n + i
            cur = current[k]
            if rho[j] < ladder[k] and mh_accept(
                log_u[k][i], log_target[j], log_proposal[j], log_target[cur], log_proposal[cur]
            ):
                current[k] = j
                local_accepted[k, i] = True

        for cold in swap_orders[i]:
            hot = cold + 1
            rho_hot = rho[current[hot]]
            swapped = rho_hot < ladder[cold]
            swaps.append(
                SwapRecord(
                    iteration=i,
                    cold=cold,
                    hot=hot,
                    hot_state=current[hot] - 1,
                    rho_hot=rho_hot,
                    epsilon_cold=ladder[cold],
                    accepted=swapped,
                )
            )
            if swapped:
                current[cold] = current[hot]

        target_chain[i] = current[0] - 1
        entered[i] = current[0] != before

    return _Tempering(target_chain, entered, local_accepted, swaps)


def _tempering_draws(n_chains: int, n: int, n_pairs: int, rng: np.random.Generator):
    log_u = np.log1p(-rng.random((n_chains, n))).tolist()
    swap_orders = [_swap_pairs(n_chains, n_pairs, rng) for _ in range(n)]
    return log_u, swap_orders


def abc_pt_step(
    obs: CountVector,
    prev: Estimate,
    net: SensorNetwork,
    cfg: SamplerConfig,
    rng: np.random.Generator,
    motion: Optional[MotionParams] = None,
    prior: Optional[StatePrior] = None,
    timestep: int = 0,
) -> tuple[ParticleSet, Estimate]:
    """ABC parallel tempering over a ladder of increasing tolerances.

    Chain k runs the ABC-RW move with tolerance ``epsilon_ladder[k]``. After
    every local sweep the state of a hotter chain is copied into the next
    colder chain when its counts satisfy the colder tolerance. The estimate
    comes from chain 0, whose tolerance is epsilon.

    With ``epsilon: auto-rate`` every chain runs ``pilot_size`` pilot
    iterations and epsilon is set so that chain 0, swaps included, accepts
    at a rate closest to the target.
    """
    obs = np.asarray(obs, dtype=np.int64)
    prior = _resolve_prior(prev, motion, prior)
    n_chains = cfg.n_chains
    n_pairs = cfg.swap_pairs_per_sweep or n_chains - 1
    start = _Batch.of_state(prior.mean, prior, obs, net, prev.state, cfg)

    if cfg.tuned_per_step:
        cfg.validate_ladder()
        m = cfg.pilot_size
        pilot = _Batch.draw(prior, n_chains * m, rng, obs, net, prev.state, cfg)
        pilot_states = pilot.prepend(start)
        pilot_u, pilot_orders = _tempering_draws(n_chains, m, n_pairs, rng)

        def rate_of(epsilon: float) -> float:
            ladder = cfg.with_epsilon(epsilon).epsilon_ladder
            return float(_temper(pilot_states, m, ladder, pilot_u, pilot_orders).entered.mean())

        cfg = _tune(cfg, pilot.rho, rate_of, timestep, Algorithm.ABC_PT.value)
    else:
        cfg = _resolve(cfg, net, prev.state.n_targets)
    cfg.validate_ladder()

    n = cfg.n_particles
    ladder = [float(e) for e in cfg.epsilon_ladder]

    # Flat proposal index k * n + i belongs to chain k, iteration i
    batch = _Batch.draw(prior, n_chains * n, rng, obs, net, prev.state, cfg)
    log_u, swap_orders = _tempering_draws(n_chains, n, n_pairs, rng)
    states = batch.prepend(start)
    run = _temper(states, n, ladder, log_u, swap_orders)

    moved_in = run.target_chain[run.entered] + 1
    proposals = ProposalLog(
        chain=np.repeat(np.arange(n_chains), n),
        index=np.tile(np.arange(n), n_chains),
        positions=batch.positions,
        velocities=batch.velocities,
        rho=batch.rho,
        log_f=batch.log_f,
        accepted=run.local_accepted.ravel(),
    )
    particle_set = _chain_particle_set(
        batch,
        start,
        run.target_chain,
        states.positions[moved_in],
        states.velocities[moved_in],
        proposals,
        states.log_f,
        cfg,
        timestep,
        swaps=run.swaps,
        epsilon=ladder[0],
    )
    logger.debug(
        "Swap summary",
        timestep=timestep,
        attempted=len(run.swaps),
        accepted=sum(s.accepted for s in run.swaps),
    )
    return particle_set, _chain_estimate(particle_set, cfg, Algorithm.ABC_PT.value)


def mcmc_baseline_step(
    obs: CountVector,
    prev: Estimate,
    net: SensorNetwork,
    cfg: SamplerConfig,
    rng: np.random.Generator,
    motion: Optional[MotionParams] = None,
    prior: Optional[StatePrior] = None,
    timestep: int = 0,
    p_correct: Optional[float] = None,
) -> tuple[ParticleSet, Estimate]:
    """Metropolis-Hastings on the exact single-target likelihood.

    ``p_correct`` defaults to ``1 - net.p_e``.
    """
    if prev.state.n_targets != 1:
        raise ModelScopeError(
            f"The likelihood baseline only handles a single target, got {prev.state.n_targets}"
        )
    obs = np.asarray(obs, dtype=np.int64)
    cfg = _resolve(cfg, net, 1)
    prior = _resolve_prior(prev, motion, prior)
    p_correct = 1 - net.p_e if p_correct is None else p_correct

    n = cfg.n_particles
    batch = _Batch.draw(prior, n, rng, obs, net, prev.state, cfg)
    start = _Batch.of_state(prior.mean, prior, obs, net, prev.state, cfg)
    log_u = np.log1p(-rng.random(n))

    log_likelihood = log_exact_likelihood(batch.counts, obs, p_correct)
    start_log_likelihood = log_exact_likelihood(start.counts, obs, p_correct)

    chain, accepted = metropolis_chain(
        log_target=log_likelihood + batch.log_prior,
        log_proposal=batch.log_prior,
        admissible=np.ones(n, dtype=bool),
        log_u=log_u,
        initial_log_target=start_log_likelihood[0] + start.log_prior[0],
        initial_log_proposal=start.log_prior[0],
    )

    particle_set = _chain_particle_set(
        batch,
        start,
        chain,
        batch.positions[accepted],
        batch.velocities[accepted],
        _single_chain_log(batch, accepted),
        np.concatenate([start_log_likelihood, log_likelihood]),
        cfg,
        timestep,
    )
    return particle_set, _chain_estimate(particle_set, cfg, Algorithm.MCMC.value)


TrackStep = tuple[ParticleSet, Estimate]


def _step_function(algorithm: Algorithm) -> Callable[..., TrackStep]:
    if algorithm == Algorithm.ABC_RW:
        def rw_step(obs, prev, net, cfg, rng, **kwargs):
            return abc_rw_step(obs, prev, None, net, cfg, rng, **kwargs)
        return rw_step

    return {
        Algorithm.ABC_REJ: abc_rej_step,
        Algorithm.ABC_PT: abc_pt_step,
        Algorithm.MCMC: mcmc_baseline_step,
    }[algorithm]


def track(
    scenario: Scenario,
    algorithm: Algorithm | str,
    cfg: SamplerConfig,
    motion: Optional[MotionParams] = None,
) -> list[TrackStep]:
    """Runs a sampler over every timestep of a scenario.

    Timestep 1 draws from discs of radius ``cfg.init_radius`` around the true
    start positions and a Gaussian around the true start velocities. Every
    later step draws from the motion prior around the previous estimate.
    """
    algorithm = Algorithm(algorithm)
    if cfg.seed is None:
        raise ConfigError("sampler.seed", "a seed is required to track a scenario")
    motion = motion or scenario.motion
    net = scenario.net
    if algorithm == Algorithm.MCMC and scenario.n_targets != 1:
        raise ModelScopeError(
            f"The likelihood baseline only handles a single target, the scenario has {scenario.n_targets}"
        )

    cfg = cfg.resolve(net.n_sensors, scenario.n_targets, net.p_e)
    if algorithm == Algorithm.ABC_PT:
        cfg.validate_ladder()

    step = _step_function(algorithm)
    initial = InitialPrior(scenario.truth[0], cfg.init_radius, cfg.init_velocity_sd)
    prev = Estimate(initial.mean, cfg.estimator)

    results: list[TrackStep] = []
    for t, obs in enumerate(scenario.observations, start=1):
        prior = initial if t == 1 else MotionPrior(prev.state, motion)
        particle_set, estimate = step(
            obs, prev, net, cfg, step_rng(cfg.seed, t), prior=prior, timestep=t
        )
        results.append((particle_set, estimate))
        prev = estimate

    logger.debug(
        "Tracking finished",
        algorithm=algorithm.value,
        duration=scenario.duration,
        fallbacks=sum(e.fallback for _, e in results),
    )
    return results
