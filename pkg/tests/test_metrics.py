import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stale_sgmcmc.errors import (
    ConfigError,
    EmptyAggregateError,
    EmptyAverageError,
    InsufficientReplicatesError,
    TargetUnreachableError,
)
from stale_sgmcmc.metrics import (
    RunEnsemble,
    aggregate_chains,
    aggregation_weights,
    estimate_report,
    fingerprint,
    iteration_speedup,
    optimal_stepsize,
    running_averages,
    sample_average,
    threshold_crossing,
    time_speedup,
)
from stale_sgmcmc.models import gaussian_posterior_summary, theta_squared
from stale_sgmcmc.sampler import ChainConfig, run_chain

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_sample_average_constant():
    assert sample_average(np.full(7, 3.25)) == 3.25


def test_sample_average_burn_in():
    assert sample_average([1, 2, 3]) == 2.0
    assert sample_average([1, 2, 3], burn_in=1) == 2.5


def test_sample_average_empty():
    with pytest.raises(EmptyAverageError):
        sample_average([1, 2, 3], burn_in=3)


def test_running_averages():
    assert running_averages([1, 2, 3, 4], [1, 2, 4]).tolist() == [1.0, 1.5, 2.5]


def test_report_exact_ensemble():
    rep = estimate_report(RunEnsemble((1.7, 1.7)), 1.7)
    assert (rep.bias, rep.mse, rep.variance) == (0.0, 0.0, 0.0)


def test_report_arithmetic():
    rep = estimate_report([0.0, 2.0], 0.0)
    assert (rep.bias, rep.mse, rep.variance) == (1.0, 2.0, 2.0)


def test_report_needs_two():
    with pytest.raises(InsufficientReplicatesError):
        estimate_report([1.0], 0.0)


def test_ensemble_rejects_nonfinite():
    with pytest.raises(ValueError):
        RunEnsemble((1.0, float("nan")))


@given(st.lists(finite, min_size=2, max_size=60), finite)
def test_decomposition_identity(est, phi_bar):
    rep = estimate_report(est, phi_bar)
    r = len(est)
    scale = max(1.0, rep.mse)
    assert abs(rep.mse - (rep.bias**2 + rep.variance * (r - 1) / r)) <= 1e-12 * scale * 1e3


def test_decomposition_on_gaussian_ensemble(small_gaussian):
    est = [sample_average(run_chain(small_gaussian, theta_squared(),
                                    ChainConfig(step_size=2e-3, minibatch=5, iterations=200, seed=s)))
           for s in range(200)]
    phi_bar = gaussian_posterior_summary(small_gaussian.data, theta_squared()).phi_bar
    rep = estimate_report(est, phi_bar)
    assert abs(rep.mse - (rep.bias**2 + rep.variance * 199 / 200)) < 1e-12


def test_aggregate_single():
    assert aggregate_chains([4.2], [(100, 0.01)]) == 4.2


def test_aggregate_equal_spans_is_mean():
    assert aggregate_chains([1.0, 2.0, 6.0], [(10, 0.1)] * 3) == pytest.approx(3.0, abs=1e-15)


def test_aggregate_weighted():
    assert aggregate_chains([2.0, 6.0], [(1, 1.0), (3, 1.0)]) == 5.0


@given(st.lists(st.tuples(st.integers(1, 10_000), st.floats(1e-6, 1.0)), min_size=1, max_size=10))
def test_weights_sum_to_one(spans):
    w = aggregation_weights(spans)
    assert abs(w.sum() - 1.0) < 1e-12 and np.all(w > 0)


def test_aggregate_errors():
    with pytest.raises(EmptyAggregateError):
        aggregate_chains([], [])
    with pytest.raises(ConfigError):
        aggregate_chains([1.0, 2.0], [(1, 0.1)])
    with pytest.raises(ConfigError):
        aggregate_chains([1.0], [(1, 0.0)])


def test_optimal_stepsize_examples():
    assert optimal_stepsize(1, 1, 1) == 1.0
    assert optimal_stepsize(1 / 30, 1, 500) == pytest.approx(500 ** (-1 / 3) / 30, rel=1e-14)
    assert optimal_stepsize(1 / 30, 1, 500) == pytest.approx(0.00419973683298, rel=1e-11)
    assert optimal_stepsize(1 / 30, 8, 4000) == pytest.approx(5.25e-4, rel=2e-3)


def test_optimal_stepsize_tau_zero():
    with pytest.raises(ConfigError):
        optimal_stepsize(1.0, 0, 10)


@given(st.floats(1e-3, 10), st.integers(1, 50), st.integers(1, 10**6))
def test_optimal_stepsize_balances_terms(c, tau, l):
    # h = c tau^(-2/3) L^(-1/3) makes (tau h)^2 equal c^3 / (L h)
    h = optimal_stepsize(c, tau, l)
    assert (tau * h) ** 2 == pytest.approx(c**3 / (l * h), rel=1e-9)


def test_threshold_interpolation():
    assert threshold_crossing([10, 20], [0.2, 0.1], 0.15) == pytest.approx(15.0)


def test_threshold_skips_rising_start():
    assert threshold_crossing([1, 2, 3, 4], [0.0, 0.3, 0.2, 0.05], 0.1) == pytest.approx(3 + 0.1 / 0.15)


def test_threshold_never_reached():
    assert threshold_crossing([1, 2], [0.5, 0.4], 0.1) is None


def test_speedup_single_curve():
    rep = iteration_speedup({1: ([10, 20], [0.2, 0.1])}, 0.15)
    assert rep.iteration_speedup == [1.0]


def test_speedup_closed_form_curves():
    # half-unit grid so every crossing L = 100 / W lands on a logged point
    lbar = np.arange(1, 1001, 0.5)
    curves = {w: (lbar, 1.0 / (w * lbar)) for w in (1, 2, 4, 8)}
    rep = iteration_speedup(curves, 0.01)
    for w, s in rep.as_dict().items():
        assert s == pytest.approx(w, rel=1e-12)


def test_speedup_errors():
    with pytest.raises(ConfigError):
        iteration_speedup({2: ([1, 2], [1.0, 0.1])}, 0.5)
    with pytest.raises(TargetUnreachableError):
        iteration_speedup({1: ([1, 2], [1.0, 0.1]), 2: ([1, 2], [1.0, 0.9])}, 0.5)


def test_time_speedup():
    assert time_speedup({1: 10.0, 2: 5.0, 4: 4.0}) == {1: 1.0, 2: 2.0, 4: 2.5}


def test_fingerprint_stable():
    assert fingerprint({"a": 1, "b": [1, 2]}) == fingerprint({"b": [1, 2], "a": 1})
    assert len(fingerprint("x")) == 16
    assert math.isfinite(estimate_report([1.0, 2.0, 3.0], 2.0).mse_standard_error)
