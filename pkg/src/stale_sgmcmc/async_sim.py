"""Discrete-event simulation of asynchronous server/worker SG-MCMC.

One server owns the chain state.  Each of ``W`` workers holds the last
parameter it was sent, computes a minibatch gradient from it and hands the
result back; the server applies one kernel step per consumed gradient and
replies with its newest parameter.  Staleness is whatever falls out of the
message order, which is set by a ``SchedulePolicy`` in simulated time.
"""
from __future__ import annotations

import heapq
import queue
import threading
import time
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, EmptyTraceError, PolicyViolationError
from .models import draw_indices, minibatch_gradient
from .rng import stream
from .sampler import ChainConfig, SimTrace, StaleGradient, check_chain_inputs, initial_state, kernel_step

POLICY_KINDS = ("round-robin", "random-ready", "event-driven")


@dataclass(frozen=True)
class SchedulePolicy:
    """Order in which the server consumes worker gradients.

    ``round-robin``: equal unit compute times, ties broken by worker id;
    staleness settles at exactly W - 1.
    ``random-ready``: every worker always has a gradient waiting and the
    server picks one uniformly at random.
    ``event-driven``: worker w takes ``compute_means[w]`` simulated time per
    gradient, either exactly (``distribution="constant"``) or as an
    exponential draw with that mean.
    """

    kind: str = "round-robin"
    compute_means: Optional[Sequence[float]] = None
    distribution: str = "constant"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"unknown schedule policy {self.kind!r}")
        if self.distribution not in ("constant", "exponential"):
            raise ConfigError(f"unknown compute-time distribution {self.distribution!r}")
        if self.compute_means is not None:
            means = tuple(float(m) for m in self.compute_means)
            if any(not m > 0 for m in means):
                raise ConfigError("compute times must be strictly positive")
            object.__setattr__(self, "compute_means", means)

    @property
    def bounded(self):
        """True when the policy itself guarantees staleness <= W - 1."""
        return self.kind == "round-robin"

    def means_for(self, workers):
        if self.compute_means is None:
            return (1.0,) * workers
        if len(self.compute_means) != workers:
            raise ConfigError(f"{len(self.compute_means)} compute means given for {workers} workers")
        return self.compute_means


@dataclass
class WorkerState:
    worker_id: int
    held_parameter: np.ndarray
    held_issue_iteration: int
    busy_until: float


@dataclass
class GradientMessage:
    worker_id: int
    vector: np.ndarray
    issue_iteration: int
    ready_time: float


def run_single_server(model, phi, cfg: ChainConfig, workers: int, policy: SchedulePolicy = SchedulePolicy(),
                      theta0=None) -> SimTrace:
    """Simulate one server with ``workers`` asynchronous workers for ``cfg.iterations`` accepted updates."""
    if workers < 1:
        raise ConfigError("need at least one worker")
    check_chain_inputs(model, cfg)
    L, tau, dim = cfg.iterations, cfg.staleness_bound, model.dim
    n, j = model.n_items, cfg.minibatch
    noise = stream(cfg.seed, "noise").standard_normal((L, dim))
    batch_rngs = [stream(cfg.seed, "minibatch", w) for w in range(workers)]
    sched_rng = stream(policy.seed, "schedule")
    means = policy.means_for(workers) if policy.kind != "random-ready" else None

    def duration(w):
        if policy.kind == "round-robin":
            return 1.0
        if policy.distribution == "exponential":
            return float(sched_rng.exponential(means[w]))
        return means[w]

    state = initial_state(cfg.kind, dim, theta0)
    pool = [WorkerState(w, state.theta, 0, 0.0) for w in range(workers)]

    def dispatch(w, now, issue):
        ws = pool[w]
        ws.held_parameter, ws.held_issue_iteration = state.theta, issue
        g = minibatch_gradient(model, ws.held_parameter, draw_indices(n, j, batch_rngs[w]))
        ws.busy_until = now + duration(w) if means is not None else now
        return GradientMessage(w, g, issue, ws.busy_until)

    ready = []  # (ready_time, worker_id, message)
    inbox = [None] * workers
    for w in range(workers):
        msg = dispatch(w, 0.0, 0)
        if means is not None:
            heapq.heappush(ready, (msg.ready_time, w, msg))
        else:
            inbox[w] = msg

    samples = np.empty((L, dim))
    momenta = np.empty((L, dim)) if cfg.kind == "sghmc" else None
    staleness = np.empty(L, dtype=np.int64)
    phis = np.empty(L)
    times = np.empty(L)
    who = np.empty(L, dtype=np.int64)
    rejected = 0
    consumed = 0
    now = 0.0
    l = 0
    while l < L:
        if means is not None:
            now, w, msg = heapq.heappop(ready)
        else:
            w = int(sched_rng.integers(workers))
            msg = inbox[w]
            now = float(consumed + 1)
        consumed += 1
        tau_l = l - msg.issue_iteration
        if tau_l > tau and policy.bounded:
            raise PolicyViolationError(
                f"{policy.kind} produced staleness {tau_l} > bound {tau} with {workers} workers")
        state, accepted = kernel_step(state, StaleGradient(msg.vector, tau_l), cfg, noise[l])
        if accepted:
            samples[l] = state.theta
            if momenta is not None:
                momenta[l] = state.momentum
            staleness[l] = tau_l
            phis[l] = phi(state.theta) if phi is not None else np.nan
            times[l] = now
            who[l] = w
            l += 1
        else:
            rejected += 1
        msg = dispatch(w, now, l)
        if means is not None:
            heapq.heappush(ready, (msg.ready_time, w, msg))
        else:
            inbox[w] = msg
    assert l + rejected == consumed
    return SimTrace(samples, staleness, phis, times, who, rejected, momenta)


def run_multi_server(model, phi, per_server, theta0=None):
    """Independent single-server simulations, one per ``(cfg, workers, policy)`` entry."""
    if len(per_server) < 1:
        raise ConfigError("need at least one server")
    return [run_single_server(model, phi, cfg, w, pol, theta0) for cfg, w, pol in per_server]


def staleness_histogram(trace: SimTrace, warmup: int = 0) -> dict:
    """Relative frequency of each staleness value among accepted updates after ``warmup``."""
    values = trace.staleness[warmup:]
    if values.shape[0] == 0:
        raise EmptyTraceError("trace holds no accepted updates")
    counts = Counter(values.tolist())
    total = values.shape[0]
    return {k: counts[k] / total for k in sorted(counts)}


def run_threaded(model, phi, cfg: ChainConfig, workers: int, compute_delay: float = 0.0, theta0=None):
    """Real-thread variant for wall-clock measurements only.

    Workers run in OS threads and talk to the server through queues; the
    server serializes updates.  The message order is up to the OS scheduler,
    so the result is not reproducible.  ``compute_delay`` (seconds) is slept
    by each worker per gradient to stand in for expensive gradient work.
    Returns ``(trace, wall_seconds)``; ``trace.sim_times`` holds wall-clock
    offsets from the start.
    """
    if workers < 1:
        raise ConfigError("need at least one worker")
    check_chain_inputs(model, cfg)
    L, tau, dim = cfg.iterations, cfg.staleness_bound, model.dim
    n, j = model.n_items, cfg.minibatch
    noise = stream(cfg.seed, "noise").standard_normal((L, dim))
    to_server = queue.Queue()
    inboxes = [queue.Queue() for _ in range(workers)]

    def worker_loop(w):
        rng = stream(cfg.seed, "minibatch", w)
        while True:
            item = inboxes[w].get()
            if item is None:
                return
            theta, issue = item
            g = minibatch_gradient(model, theta, draw_indices(n, j, rng))
            if compute_delay:
                time.sleep(compute_delay)
            to_server.put((w, g, issue))

    threads = [threading.Thread(target=worker_loop, args=(w,), daemon=True) for w in range(workers)]
    for t in threads:
        t.start()
    state = initial_state(cfg.kind, dim, theta0)
    start = time.perf_counter()
    for w in range(workers):
        inboxes[w].put((state.theta, 0))
    samples = np.empty((L, dim))
    staleness = np.empty(L, dtype=np.int64)
    phis = np.empty(L)
    times = np.empty(L)
    who = np.empty(L, dtype=np.int64)
    rejected = 0
    l = 0
    try:
        while l < L:
            w, g, issue = to_server.get()
            tau_l = l - issue
            state, accepted = kernel_step(state, StaleGradient(g, tau_l), cfg, noise[l])
            if accepted:
                samples[l], staleness[l], who[l] = state.theta, tau_l, w
                phis[l] = phi(state.theta) if phi is not None else np.nan
                times[l] = time.perf_counter() - start
                l += 1
            else:
                rejected += 1
            if l < L:
                inboxes[w].put((state.theta, l))
    finally:
        for box in inboxes:
            box.put(None)
        for t in threads:
            t.join(timeout=5.0)
    wall = time.perf_counter() - start
    return SimTrace(samples, staleness, phis, times, who, rejected), wall
