"""Stale-gradient SG-MCMC samplers with an asynchronous server/worker simulator
and an estimator harness for replicated runs."""
from .async_sim import SchedulePolicy, run_multi_server, run_single_server, staleness_histogram
from .metrics import (
    RunEnsemble,
    aggregate_chains,
    estimate_report,
    iteration_speedup,
    optimal_stepsize,
    sample_average,
)
from .models import (
    Dataset,
    GaussianModel,
    LogisticRegressionModel,
    full_gradient,
    gaussian_posterior_summary,
    generate_gaussian_data,
    logistic_loss,
    parse_libsvm,
    quadrature_posterior_average,
    stochastic_gradient,
    theta_squared,
)
from .sampler import ChainConfig, FixedDelay, SamplerState, SimTrace, StaleGradient, run_chain

__version__ = "0.1.0"
