"""Why the experiment step sizes are read the way they are.

With N = 1000 the Gaussian posterior has curvature N + 1, so an Euler step
h with h * (N + 1) > 2 diverges even without staleness, and a stale
gradient shrinks the stable range further.  These tests pin down that both
literal readings of the step-size recipes blow up on the default data set,
which is why synth-mse interprets its step in per-datum units and the
staleness comparison uses h = 0.02 / (N + 1).
"""
import numpy as np

from stale_sgmcmc.config import validate
from stale_sgmcmc.metrics import optimal_stepsize
from stale_sgmcmc.sampler import ChainConfig, FixedDelay, run_chain


def _final_abs(model, h, tau, iterations):
    cfg = ChainConfig("sgld", step_size=h, minibatch=10, iterations=iterations, staleness_bound=tau)
    with np.errstate(over="ignore", invalid="ignore"):
        x = run_chain(model, None, cfg, FixedDelay(tau)).samples[-1, 0]
    return abs(x)


def test_absolute_optimal_step_diverges(gaussian_model):
    cfg = validate({"kind": "synth-mse"})
    h = optimal_stepsize(cfg.c, 1, cfg.l0)
    assert h * (gaussian_model.n_items + 1) > 2
    assert not _final_abs(gaussian_model, h, 1, 300) < 1e6


def test_per_datum_optimal_step_is_stable(gaussian_model):
    cfg = validate({"kind": "synth-mse"})
    for tau in (1, 10, 20):
        h = cfg.kernel_step(optimal_stepsize(cfg.c, tau, cfg.l0 * tau), gaussian_model.n_items)
        assert _final_abs(gaussian_model, h, tau, cfg.l0 * tau) < 1.0


def test_sqrt_scaled_step_diverges_when_stale(gaussian_model):
    h = 0.05 / np.sqrt(gaussian_model.n_items + 1)
    assert _final_abs(gaussian_model, h, 0, 2000) < 1.0
    assert not _final_abs(gaussian_model, h, 8, 2000) < 1e6


def test_chosen_staleness_step_is_stable(gaussian_model):
    assert _final_abs(gaussian_model, 0.02 / (gaussian_model.n_items + 1), 8, 2000) < 1.0
