"""SGLD and SGHMC kernels (Euler integrator) driven by possibly stale gradients."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, InvalidMinibatchError, PolicyViolationError, StateKindError
from .models import draw_indices, minibatch_gradient
from .rng import stream

KINDS = ("sgld", "sghmc")


@dataclass(frozen=True)
class ChainConfig:
    kind: str = "sgld"
    step_size: float = 1e-3
    friction: float = 1.0
    minibatch: int = 10
    iterations: int = 1000
    staleness_bound: int = 0
    integrator_order: int = 1
    seed: int = 0
    burn_in: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kernel {self.kind!r}; expected one of {KINDS}")
        if not self.step_size > 0:
            raise ConfigError(f"step_size must be positive, got {self.step_size}")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.staleness_bound < 0:
            raise ConfigError("staleness_bound must be >= 0")
        if self.integrator_order != 1:
            raise ConfigError("only the 1st-order Euler integrator is implemented")
        if self.minibatch < 1:
            raise ConfigError("minibatch must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError("burn_in must lie in [0, iterations)")
        if self.kind == "sghmc":
            if self.friction < 0:
                raise ConfigError("friction must be non-negative")
            if not 0 < self.friction * self.step_size < 1:
                warnings.warn(f"SGHMC with B*h = {self.friction * self.step_size:g} outside (0, 1)", stacklevel=3)

    def with_(self, **changes) -> "ChainConfig":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class SamplerState:
    theta: np.ndarray
    momentum: Optional[np.ndarray] = None
    iteration: int = 0

    def __post_init__(self):
        if self.momentum is not None and self.momentum.shape != self.theta.shape:
            raise StateKindError("momentum and theta dimensions differ")

    def __eq__(self, other):
        if not isinstance(other, SamplerState):
            return NotImplemented
        if (self.momentum is None) != (other.momentum is None):
            return False
        return (self.iteration == other.iteration and np.array_equal(self.theta, other.theta)
                and (self.momentum is None or np.array_equal(self.momentum, other.momentum)))


def initial_state(kind, dim, theta0=None, momentum0=None) -> SamplerState:
    theta = np.zeros(dim) if theta0 is None else np.array(theta0, dtype=np.float64).reshape(dim)
    if kind == "sghmc":
        q = np.zeros(dim) if momentum0 is None else np.array(momentum0, dtype=np.float64).reshape(dim)
        return SamplerState(theta, q)
    return SamplerState(theta)


@dataclass(frozen=True, eq=False)
class StaleGradient:
    vector: np.ndarray
    staleness: int = 0

    def __post_init__(self):
        if self.staleness < 0:
            raise ValueError("staleness must be >= 0")


def _noise(rng, noise, dim):
    if noise is not None:
        return noise
    if rng is None:
        raise ValueError("either rng or noise must be given")
    return rng.standard_normal(dim)


def sgld_step(state: SamplerState, grad: StaleGradient, h, rng=None, *, noise=None) -> SamplerState:
    """theta' = theta - h * grad + sqrt(2h) * zeta."""
    if not h > 0:
        raise ConfigError(f"step size must be positive, got {h}")
    if state.momentum is not None:
        raise StateKindError("SGLD state carries no momentum")
    zeta = _noise(rng, noise, state.theta.shape[0])
    theta = state.theta - grad.vector * h + math.sqrt(2.0 * h) * zeta
    return SamplerState(theta, None, state.iteration + 1)


def sghmc_step(state: SamplerState, grad: StaleGradient, cfg: ChainConfig, rng=None, *, noise=None):
    """One SGHMC Euler step guarded by the staleness bound.

    Returns ``(new_state, accepted)``.  A gradient older than
    ``cfg.staleness_bound`` leaves the state untouched and draws no noise.
    """
    if state.momentum is None:
        raise StateKindError("SGHMC state needs momentum")
    if grad.staleness > cfg.staleness_bound:
        return state, False
    h, b = cfg.step_size, cfg.friction
    zeta = _noise(rng, noise, state.theta.shape[0])
    q = (1.0 - b * h) * state.momentum - grad.vector * h + math.sqrt(2.0 * b * h) * zeta
    return SamplerState(state.theta + q * h, q, state.iteration + 1), True


def kernel_step(state, grad, cfg: ChainConfig, noise):
    """Dispatch on ``cfg.kind`` with the staleness guard applied to both kernels."""
    if cfg.kind == "sghmc":
        return sghmc_step(state, grad, cfg, noise=noise)
    if grad.staleness > cfg.staleness_bound:
        return state, False
    return sgld_step(state, grad, cfg.step_size, noise=noise), True


# -- staleness policies for the sequential chain ---------------------------

class StalenessPolicy:
    """Maps an iteration index to the requested staleness tau_l."""

    def __call__(self, l: int) -> int:
        raise NotImplementedError


@dataclass(frozen=True)
class FixedDelay(StalenessPolicy):
    tau: int = 0

    def __call__(self, l):
        return self.tau


@dataclass(frozen=True)
class UniformDelay(StalenessPolicy):
    """tau_l drawn uniformly from {0, ..., max_tau} by a seeded stream."""

    max_tau: int
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_rng", stream(self.seed, "schedule"))

    def __call__(self, l):
        return int(self._rng.integers(0, self.max_tau + 1))


@dataclass
class SimTrace:
    """Observable history of one chain.

    ``samples[k]`` is the parameter after the k-th accepted update, so
    ``phi_values[k] = phi(samples[k])``.  ``staleness`` is the effective
    tau_l used by that update and ``workers`` the worker that supplied it
    (always 0 for the sequential chain).
    """

    samples: np.ndarray
    staleness: np.ndarray
    phi_values: np.ndarray
    sim_times: np.ndarray
    workers: np.ndarray
    rejected_count: int = 0
    momenta: Optional[np.ndarray] = None

    @property
    def iterations(self):
        return np.arange(1, self.phi_values.shape[0] + 1)

    @property
    def n_accepted(self):
        return self.phi_values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, SimTrace):
            return NotImplemented
        arrays = ("samples", "staleness", "phi_values", "sim_times", "workers")
        # phi_values is all-NaN when no test function was given
        same = all(np.array_equal(getattr(self, a), getattr(other, a), equal_nan=a == "phi_values") for a in arrays)
        if (self.momenta is None) != (other.momenta is None):
            return False
        if self.momenta is not None:
            same = same and np.array_equal(self.momenta, other.momenta)
        return same and self.rejected_count == other.rejected_count


def check_chain_inputs(model, cfg: ChainConfig):
    if not 1 <= cfg.minibatch <= model.n_items:
        raise InvalidMinibatchError(f"minibatch {cfg.minibatch} does not fit {model.n_items} items")


def run_chain(model, phi: Optional[Callable], cfg: ChainConfig, delay: StalenessPolicy = FixedDelay(0),
              theta0=None) -> SimTrace:
    """Sequential stale-gradient chain.

    At iteration l the gradient is taken at the parameter from iteration
    ``l - tau_l`` (``tau_l`` clamped to ``l`` during warm-up), using the
    last ``tau + 1`` parameters kept in a ring buffer.
    """
    check_chain_inputs(model, cfg)
    L, tau, dim = cfg.iterations, cfg.staleness_bound, model.dim
    noise = stream(cfg.seed, "noise").standard_normal((L, dim))
    batch_rng = stream(cfg.seed, "minibatch", 0)
    n, j = model.n_items, cfg.minibatch

    state = initial_state(cfg.kind, dim, theta0)
    ring = [state.theta] * (tau + 1)
    samples = np.empty((L, dim))
    momenta = np.empty((L, dim)) if cfg.kind == "sghmc" else None
    staleness = np.empty(L, dtype=np.int64)
    phis = np.empty(L)
    for l in range(L):
        requested = delay(l)
        if requested > tau or requested < 0:
            raise PolicyViolationError(f"delay policy requested tau_l={requested} at l={l}, bound is {tau}")
        eff = min(requested, l)
        stale_theta = ring[(l - eff) % (tau + 1)]
        g = minibatch_gradient(model, stale_theta, draw_indices(n, j, batch_rng))
        state, _ = kernel_step(state, StaleGradient(g, eff), cfg, noise[l])
        ring[(l + 1) % (tau + 1)] = state.theta
        samples[l] = state.theta
        if momenta is not None:
            momenta[l] = state.momentum
        staleness[l] = eff
        phis[l] = phi(state.theta) if phi is not None else np.nan
    return SimTrace(samples, staleness, phis, np.arange(1, L + 1, dtype=np.float64),
                    np.zeros(L, dtype=np.int64), 0, momenta)
