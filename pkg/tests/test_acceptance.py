"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary) before
asserting, so a failing criterion still reports its measured values.  The
statistical criteria take a few minutes in total; deselect them with
``-m "not slow"``.
"""
import math
import os
import time
from itertools import combinations

import numpy as np
import pytest

from stale_sgmcmc.async_sim import run_single_server
from stale_sgmcmc.config import validate
from stale_sgmcmc.experiments import build_model, run_experiment, staleness_ensemble
from stale_sgmcmc.metrics import estimate_report
from stale_sgmcmc.models import (
    A9A_N_FEATURES,
    GaussianModel,
    Minibatch,
    bundled_blr_paths,
    full_gradient,
    gaussian_posterior_summary,
    generate_gaussian_data,
    parse_libsvm,
    quadrature_posterior_average,
    stochastic_gradient,
    theta_squared,
)
from stale_sgmcmc.sampler import ChainConfig, run_chain


def record(log, number, ok, detail):
    log.append(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def test_c01_quadrature_oracle(acceptance_log):
    start = time.perf_counter()
    worst = 0.0
    for n in (0, 1, 10, 1000):
        data = generate_gaussian_data(0.3, n, 17 + n)
        q = quadrature_posterior_average(GaussianModel(data), theta_squared())
        worst = max(worst, abs(q - gaussian_posterior_summary(data, theta_squared()).phi_bar))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-8 and elapsed < 1.0
    assert record(acceptance_log, 1, ok, f"max |quadrature - conjugate| = {worst:.2e} (< 1e-8), {elapsed:.2f} s (< 1 s)")


def test_c02_unbiased_minibatches(acceptance_log):
    start = time.perf_counter()
    worst = 0.0
    theta = np.array([0.37])
    for n in range(1, 7):
        model = GaussianModel(generate_gaussian_data(-0.4, n, n))
        full = full_gradient(model, theta)
        for j in range(1, n + 1):
            grads = [stochastic_gradient(model, theta, Minibatch(np.array(c), n)) for c in combinations(range(n), j)]
            worst = max(worst, float(np.max(np.abs(np.mean(grads, axis=0) - full))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 1.0
    assert record(acceptance_log, 2, ok, f"max |enumerated mean - full| = {worst:.1e} (<= 1e-12), {elapsed:.2f} s (< 1 s)")


def test_c03_single_worker_reduction(acceptance_log, gaussian_model):
    start = time.perf_counter()
    same = {}
    for kind, h in (("sgld", 1e-4), ("sghmc", 1e-3)):
        cfg = ChainConfig(kind, step_size=h, minibatch=10, iterations=10_000, seed=12)
        same[kind] = run_single_server(gaussian_model, theta_squared(), cfg, 1) == run_chain(
            gaussian_model, theta_squared(), cfg)
    elapsed = time.perf_counter() - start
    ok = all(same.values()) and elapsed < 1.0
    assert record(acceptance_log, 3, ok, f"bitwise equal {same}, {elapsed:.2f} s (< 1 s)")


@pytest.mark.slow
def test_c04_mse_after_l0_tau_iterations(acceptance_log):
    cfg = validate({"kind": "synth-mse", "taus": (1, 2, 5, 10)})
    mse = run_experiment(cfg).summary["endpoint_mse"]
    spread = max(mse.values()) / min(mse.values())
    vs_one = max(max(v, mse[1]) / min(v, mse[1]) for v in mse.values())
    ok = spread <= 2.0 and vs_one <= 3.0
    detail = ", ".join(f"tau={t}: {v:.3g}" for t, v in mse.items())
    assert record(acceptance_log, 4, ok, f"end-point MSE {detail}; max/min = {spread:.2f} (<= 2), "
                                         f"worst vs tau=1 = {vs_one:.2f} (<= 3)")


@pytest.fixture(scope="module")
def stale_vs_fresh(gaussian_model):
    # h = 0.02 / (N + 1): the largest round step at which tau = 8 stays stable
    # while the tau^2 h^2 term still dominates the MSE difference
    chain = ChainConfig("sgld", step_size=0.02 / (gaussian_model.n_items + 1), minibatch=10, iterations=2000)
    phi_bar = gaussian_posterior_summary(gaussian_model.data, theta_squared()).phi_bar
    return {tau: estimate_report(staleness_ensemble(gaussian_model, theta_squared(), chain, tau, 200), phi_bar)
            for tau in (0, 8)}


@pytest.mark.slow
def test_c05_staleness_raises_mse(acceptance_log, stale_vs_fresh):
    fresh, stale = stale_vs_fresh[0], stale_vs_fresh[8]
    se = math.hypot(fresh.mse_standard_error, stale.mse_standard_error)
    z = (stale.mse - fresh.mse) / se
    ok = z > 2.0
    assert record(acceptance_log, 5, ok, f"MSE tau=8 {stale.mse:.3g} vs tau=0 {fresh.mse:.3g}, "
                                         f"difference = {z:.2f} combined SE (> 2)")


@pytest.mark.slow
def test_c06_variance_independent_of_staleness(acceptance_log, stale_vs_fresh):
    ratio = stale_vs_fresh[8].variance / stale_vs_fresh[0].variance
    ok = 2 / 3 <= ratio <= 3 / 2
    assert record(acceptance_log, 6, ok, f"Var(tau=8)/Var(tau=0) = {ratio:.3f} (in [0.667, 1.5])")


@pytest.mark.slow
def test_c07_linear_variance_speedup(acceptance_log):
    report = run_experiment(validate({"kind": "variance-speedup"})).summary["speedup"]
    speedup = report.as_dict()
    ok = all(0.6 * w <= s <= 1.4 * w for w, s in speedup.items())
    detail = ", ".join(f"W={w}: {s:.2f}" for w, s in speedup.items())
    assert record(acceptance_log, 7, ok, f"iteration speedup {detail} (each in [0.6W, 1.4W]), "
                                         f"target variance {report.target:.3g}")


@pytest.mark.slow
def test_c08_multichain_variance(acceptance_log):
    summary = run_experiment(validate({"kind": "multichain"})).summary
    ratio = summary["ratio"]
    ok = all(0.7 / s <= r <= 1.4 / s for s, r in ratio.items())
    ok = ok and summary["variance"][1] == summary["single_chain_variance"][1]
    detail = ", ".join(f"S={s}: {r:.3f}" for s, r in ratio.items())
    assert record(acceptance_log, 8, ok, f"var(S)/var(1) {detail} (each in [0.7/S, 1.4/S])")


def test_c09_round_robin_staleness(acceptance_log, gaussian_model):
    exact = {}
    for w in (1, 2, 4, 8, 16):
        cfg = ChainConfig("sgld", step_size=1e-4, minibatch=10, iterations=2000, staleness_bound=w - 1)
        exact[w] = bool(np.all(run_single_server(gaussian_model, None, cfg, w).staleness[w:] == w - 1))
    assert record(acceptance_log, 9, all(exact.values()), f"tau_l == W - 1 after warm-up: {exact}")


def test_c10_desk_scale_path(acceptance_log):
    model, phi, _ = build_model(validate({"kind": "blr"}))
    train = parse_libsvm(bundled_blr_paths()[0], A9A_N_FEATURES)
    ok = model.n_items == 2000 and train.n_items == 2000 and model.dim == A9A_N_FEATURES
    assert record(acceptance_log, 10, ok, f"desk-scale path: {model.n_items} train / {phi.held_out.n_items} test "
                                          f"items, {model.dim} features")


def test_c10_full_a9a_counts(acceptance_log):
    train_path, test_path = os.environ.get("A9A_TRAIN"), os.environ.get("A9A_TEST")
    if not (train_path and test_path):
        acceptance_log.append("criterion 10: SKIP  full a9a counts (set A9A_TRAIN and A9A_TEST to the LIBSVM files)")
        pytest.skip("full a9a files not supplied")
    counts = (parse_libsvm(train_path, A9A_N_FEATURES).n_items, parse_libsvm(test_path, A9A_N_FEATURES).n_items)
    assert record(acceptance_log, 10, counts == (32561, 16281), f"full a9a counts {counts} (32561 / 16281)")


def test_c11_blr_descent(acceptance_log):
    cfg = validate({"kind": "blr"})
    model, loss, _ = build_model(cfg)
    chain = ChainConfig("sgld", step_size=cfg.step_size, minibatch=cfg.minibatch, iterations=1000, seed=0)
    trace = run_chain(model, None, chain)
    before, after = loss(np.zeros(model.dim)), loss(trace.samples[-1])
    assert record(acceptance_log, 11, after < before,
                  f"BLR held-out loss {before:.2f} at theta=0 -> {after:.2f} after 1000 iterations (W=1, seed 0)")
