import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bintrack.metrics import (
    PseudoLikelihoodParams,
    distances,
    log_pseudo_likelihood,
    pseudo_likelihood,
    rho,
    tune_epsilon,
    tune_epsilon_to_rate,
)
from bintrack.model import TargetState

counts = arrays(np.int64, st.integers(1, 20), elements=st.integers(0, 5))


def test_rho():
    assert rho([2, 0, 1], [2, 0, 1]) == 0
    assert rho([0, 1, 2], [1, 1, 0]) == 5


def test_rho_length_mismatch():
    with pytest.raises(ValueError, match="lengths"):
        rho([0, 1], [0, 1, 2])


@settings(max_examples=50)
@given(data=st.data(), c1=counts)
def test_rho_is_symmetric_and_permutation_invariant(data, c1):
    c2 = data.draw(arrays(np.int64, c1.shape, elements=st.integers(0, 5)))
    order = np.array(data.draw(st.permutations(range(len(c1)))))

    assert rho(c1, c2) == rho(c2, c1)
    assert rho(c1[order], c2[order]) == rho(c1, c2)
    assert rho(c1, c2) >= 0


def test_distances_match_rho(rng):
    batch = rng.integers(0, 4, size=(10, 16))
    obs = rng.integers(0, 4, size=16)

    np.testing.assert_array_equal(distances(batch, obs), [rho(row, obs) for row in batch])


@pytest.mark.parametrize(
    "n_sensors, n_targets, p_e, expected",
    [
        (64, 2, 0.05, 0.64),
        (16, 4, 0.1, 2.56),
        (64, 3, 0.0, 1.0),
        (16, 1, 0.0, 1.0),
    ],
)
def test_tune_epsilon(n_sensors, n_targets, p_e, expected):
    assert tune_epsilon(n_sensors, n_targets, p_e) == pytest.approx(expected)


def test_pseudo_likelihood_is_one_without_manoeuvre(two_targets):
    assert pseudo_likelihood(two_targets, two_targets, PseudoLikelihoodParams()) == 1.0


def test_pseudo_likelihood_right_angle_turn():
    previous = TargetState([[0.0, 0.0]], [[1.0, 0.0]])
    proposed = TargetState([[0.0, 0.0]], [[0.0, 1.0]])
    params = PseudoLikelihoodParams(sigma_bearing=np.pi / 8)

    assert pseudo_likelihood(proposed, previous, params) == pytest.approx(np.exp(-8.0))


def test_pseudo_likelihood_speed_change():
    previous = TargetState([[0.0, 0.0]], [[1.0, 0.0]])
    proposed = TargetState([[0.0, 0.0]], [[2.0, 0.0]])
    params = PseudoLikelihoodParams(sigma_speed=0.5)

    assert pseudo_likelihood(proposed, previous, params) == pytest.approx(np.exp(-2.0))


def test_pseudo_likelihood_reversal_is_a_half_turn():
    log_f = log_pseudo_likelihood([[[-1.0, 0.0]]], [[1.0, 0.0]], PseudoLikelihoodParams(sigma_bearing=1.0))
    assert log_f[0] == pytest.approx(-np.pi ** 2 / 2)


def test_pseudo_likelihood_zero_velocity_has_no_bearing_term():
    previous = TargetState([[0.0, 0.0]], [[0.0, 0.0]])
    proposed = TargetState([[0.0, 0.0]], [[0.0, 0.0]])
    assert pseudo_likelihood(proposed, previous, PseudoLikelihoodParams()) == 1.0


def test_pseudo_likelihood_flat_kernels():
    params = PseudoLikelihoodParams(sigma_bearing=np.inf, sigma_speed=np.inf)
    velocities = np.random.default_rng(0).normal(size=(50, 3, 2))

    np.testing.assert_array_equal(log_pseudo_likelihood(velocities, np.ones((3, 2)), params), 0.0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), scale=st.floats(0.01, 10.0))
def test_pseudo_likelihood_is_at_most_one(seed, scale):
    rng = np.random.default_rng(seed)
    previous = rng.normal(size=(3, 2))
    velocities = previous + rng.normal(scale=scale, size=(20, 3, 2))

    assert np.all(log_pseudo_likelihood(velocities, previous, PseudoLikelihoodParams()) <= 0)


def test_pseudo_likelihood_target_count_mismatch(one_target, two_targets):
    with pytest.raises(ValueError, match="target count"):
        pseudo_likelihood(one_target, two_targets, PseudoLikelihoodParams())


@pytest.mark.parametrize("kwargs", [{"sigma_bearing": 0.0}, {"sigma_speed": -1.0}])
def test_pseudo_likelihood_params_validation(kwargs):
    with pytest.raises(ValueError, match="strictly positive"):
        PseudoLikelihoodParams(**kwargs)


def test_rho_rejects_fractional_counts():
    assert rho([1.0, 2.0], [1, 0]) == 4.0
    with pytest.raises(ValueError, match="integers"):
        rho([0.5, 1.0], [0, 1])
    with pytest.raises(ValueError, match="integers"):
        distances(np.zeros((2, 2), dtype=np.int64), [np.nan, 1.0])


@settings(max_examples=50)
@given(
    n_sensors=st.integers(1, 200),
    n_targets=st.integers(1, 10),
    p_e=st.floats(0.001, 0.49),
    step=st.integers(0, 50),
    p_step=st.floats(0.0, 0.3),
)
def test_tune_epsilon_is_monotone(n_sensors, n_targets, p_e, step, p_step):
    base = tune_epsilon(n_sensors, n_targets, p_e)

    assert tune_epsilon(n_sensors + step, n_targets, p_e) >= base
    assert tune_epsilon(n_sensors, n_targets + step, p_e) >= base
    assert tune_epsilon(n_sensors, n_targets, min(p_e + p_step, 0.49)) >= base


def test_tune_epsilon_to_rate_picks_the_closest_quantile():
    pilot = np.array([0, 1, 1, 2, 2, 2, 3, 3, 3, 3])

    # Shares below 0.5, 1.5, 2.5 and 3.5 are 0.1, 0.3, 0.6 and 1.0
    assert tune_epsilon_to_rate(pilot, 0.1) == 0.5
    assert tune_epsilon_to_rate(pilot, 0.35) == 1.5
    assert tune_epsilon_to_rate(pilot, 0.5) == 2.5
    assert tune_epsilon_to_rate(pilot, 0.99) == 3.5
    assert tune_epsilon_to_rate(pilot, 0.4) == 1.5


def test_tune_epsilon_to_rate_prefers_the_smaller_tolerance_on_ties():
    # Shares 0.25 and 0.5 sit at the same distance from 0.375
    assert tune_epsilon_to_rate([0, 1, 2, 3], 0.375) == 0.5


def test_tune_epsilon_to_rate_with_a_custom_rate():
    pilot = np.arange(20)
    seen = []

    def rate_of(epsilon):
        seen.append(epsilon)
        return float(np.mean(pilot < epsilon)) / 2

    epsilon = tune_epsilon_to_rate(pilot, 0.2, rate_of)

    assert epsilon == 7.5
    assert len(set(seen)) < len(pilot)


def test_tune_epsilon_to_rate_unreachable_target():
    assert tune_epsilon_to_rate([4, 4, 6], 0.5, lambda epsilon: 0.1) == 6.5


@pytest.mark.parametrize("target", [0.0, 1.0, -0.2])
def test_tune_epsilon_to_rate_rejects_bad_targets(target):
    with pytest.raises(ValueError, match="target_rate"):
        tune_epsilon_to_rate([1, 2], target)


@settings(max_examples=50)
@given(
    rho_values=arrays(np.int64, st.integers(1, 200), elements=st.integers(0, 40)),
    target=st.floats(0.01, 0.99),
)
def test_tune_epsilon_to_rate_admits_the_closest_share(rho_values, target):
    epsilon = tune_epsilon_to_rate(rho_values, target)
    achieved = np.mean(rho_values < epsilon)

    candidates = np.unique(rho_values) + 0.5
    best = min(abs(np.mean(rho_values < c) - target) for c in candidates)
    assert abs(achieved - target) == pytest.approx(best)


def _velocity(speed, heading):
    return [speed * np.cos(heading), speed * np.sin(heading)]


@settings(max_examples=60, deadline=None)
@given(
    speeds=st.lists(st.floats(0.1, 5.0), min_size=4, max_size=4),
    headings=st.lists(st.floats(-np.pi, np.pi), min_size=4, max_size=4),
    rotation=st.floats(-np.pi, np.pi),
)
def test_pseudo_likelihood_ignores_global_rotation(speeds, headings, rotation):
    previous = np.array([_velocity(speeds[0], headings[0]), _velocity(speeds[1], headings[1])])
    proposed = np.array([_velocity(speeds[2], headings[2]), _velocity(speeds[3], headings[3])])
    turn = np.array([[np.cos(rotation), -np.sin(rotation)], [np.sin(rotation), np.cos(rotation)]])
    params = PseudoLikelihoodParams()

    log_f = log_pseudo_likelihood(proposed[np.newaxis], previous, params)[0]
    rotated = log_pseudo_likelihood((proposed @ turn.T)[np.newaxis], previous @ turn.T, params)[0]

    assert rotated == pytest.approx(log_f, rel=1e-6, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(
    speed=st.floats(0.5, 5.0),
    heading=st.floats(-np.pi, np.pi),
    turns=st.lists(st.floats(-3.0, 3.0), min_size=2, max_size=2),
    changes=st.lists(st.floats(-0.4, 3.0), min_size=2, max_size=2),
)
def test_pseudo_likelihood_decreases_with_the_manoeuvre(speed, heading, turns, changes):
    previous = TargetState([[0.0, 0.0]], [_velocity(speed, heading)])
    params = PseudoLikelihoodParams()

    def score(turn, change):
        proposed = TargetState([[0.0, 0.0]], [_velocity(speed * (1 + change), heading + turn)])
        return np.log(pseudo_likelihood(proposed, previous, params))

    small_turn, large_turn = sorted(turns, key=abs)
    small_change, large_change = sorted(changes, key=abs)
    assert score(small_turn, 0.0) >= score(large_turn, 0.0) - 1e-9
    assert score(0.0, small_change) >= score(0.0, large_change) - 1e-9
