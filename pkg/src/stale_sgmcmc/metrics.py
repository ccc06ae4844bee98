"""Bias/MSE/variance estimators, multi-chain aggregation and speedup bookkeeping."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    ConfigError,
    EmptyAggregateError,
    EmptyAverageError,
    InsufficientReplicatesError,
    TargetUnreachableError,
)


def fingerprint(obj) -> str:
    """Short stable hash of a JSON-serializable configuration."""
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class RunEnsemble:
    estimates: Tuple[float, ...]
    config_fingerprint: str = ""

    def __post_init__(self):
        est = tuple(float(e) for e in self.estimates)
        if len(est) < 1:
            raise InsufficientReplicatesError("an ensemble needs at least one replicate")
        if not all(math.isfinite(e) for e in est):
            raise ValueError("ensemble estimates must be finite")
        object.__setattr__(self, "estimates", est)

    @property
    def r(self):
        return len(self.estimates)


@dataclass(frozen=True)
class EstimatorReport:
    bias: float
    mse: float
    variance: float
    phi_bar: float
    r: int
    standard_error_of_mean: float
    # standard error of the MSE itself, for comparing two ensembles
    mse_standard_error: float = float("nan")


def sample_average(trace_or_values, burn_in=0) -> float:
    """Mean of the test-function values after discarding the first ``burn_in``."""
    values = getattr(trace_or_values, "phi_values", trace_or_values)
    values = np.asarray(values, dtype=np.float64)
    if burn_in >= values.shape[0]:
        raise EmptyAverageError(f"burn_in={burn_in} leaves nothing of {values.shape[0]} values")
    return float(values[burn_in:].mean())


def running_averages(values, checkpoints) -> np.ndarray:
    """Sample averages over the first ``c`` values for every checkpoint ``c``."""
    csum = np.cumsum(np.asarray(values, dtype=np.float64))
    cp = np.asarray(checkpoints, dtype=np.int64)
    return csum[cp - 1] / cp


def estimate_report(ensemble, phi_bar) -> EstimatorReport:
    """bias = |mean - phi_bar|, mse = mean squared error, variance with an R - 1 divisor."""
    if not isinstance(ensemble, RunEnsemble):
        ensemble = RunEnsemble(tuple(ensemble))
    est = np.asarray(ensemble.estimates)
    r = est.shape[0]
    if r < 2:
        raise InsufficientReplicatesError("variance needs at least two replicates")
    mean = est.mean()
    sq_err = (est - phi_bar) ** 2
    variance = float(np.sum((est - mean) ** 2) / (r - 1))
    return EstimatorReport(
        bias=float(abs(mean - phi_bar)),
        mse=float(sq_err.mean()),
        variance=variance,
        phi_bar=float(phi_bar),
        r=r,
        standard_error_of_mean=math.sqrt(variance / r),
        mse_standard_error=float(sq_err.std(ddof=1) / math.sqrt(r)),
    )


def aggregation_weights(spans: Sequence[Tuple[float, float]]) -> np.ndarray:
    """Time-span weights T_s / T with T_s = L_s * h_s."""
    if len(spans) == 0:
        raise EmptyAggregateError("nothing to aggregate")
    t = np.array([float(l) * float(h) for l, h in spans])
    if any(h <= 0 for _, h in spans):
        raise ConfigError("step sizes must be positive")
    return t / t.sum()


def aggregate_chains(estimates: Sequence[float], spans: Sequence[Tuple[float, float]]) -> float:
    if len(estimates) == 0 or len(spans) == 0:
        raise EmptyAggregateError("nothing to aggregate")
    if len(estimates) != len(spans):
        raise ConfigError("estimates and spans differ in length")
    return float(np.dot(aggregation_weights(spans), np.asarray(estimates, dtype=np.float64)))


def optimal_stepsize(c, tau, l) -> float:
    """Step size c * tau^(-2/3) * L^(-1/3) balancing the 1/(Lh) and tau^2 h^2 MSE terms."""
    if tau == 0:
        raise ConfigError("optimal step size is defined for tau >= 1; substitute tau = 1")
    if not c > 0 or tau < 1 or l < 1:
        raise ConfigError("need c > 0, tau >= 1 and L >= 1")
    return c * tau ** (-2.0 / 3.0) * l ** (-1.0 / 3.0)


def threshold_crossing(xs, ys, target) -> Optional[float]:
    """First x where the piecewise-linear curve (xs, ys) falls to ``target`` or below.

    Points before the curve first exceeds ``target`` are skipped: chains
    started from a common point have near-zero spread early on, and that
    rising stretch is not a crossing.  A curve that never exceeds the
    target crosses at its first point.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    above = np.flatnonzero(ys > target)
    if above.shape[0] == 0:
        return float(xs[0]) if xs.shape[0] else None
    for k in range(above[0] + 1, xs.shape[0]):
        if ys[k] <= target:
            x0, x1, y0, y1 = xs[k - 1], xs[k], ys[k - 1], ys[k]
            return float(x0 + (y0 - target) * (x1 - x0) / (y0 - y1))
    return None


@dataclass
class SpeedupReport:
    worker_counts: list
    iterations_to_precision: list
    iteration_speedup: list
    time_speedup: Optional[list] = None
    target: float = float("nan")

    def as_dict(self) -> Dict[int, float]:
        return dict(zip(self.worker_counts, self.iteration_speedup))


def iteration_speedup(curves: Mapping[int, Tuple[Sequence[float], Sequence[float]]], target) -> SpeedupReport:
    """Per-worker iterations to reach ``target`` relative to the single-worker curve."""
    if 1 not in curves:
        raise ConfigError("the W=1 curve is required")
    ws = sorted(curves)
    reached = []
    for w in ws:
        xs, ys = curves[w]
        lbar = threshold_crossing(xs, ys, target)
        if lbar is None:
            raise TargetUnreachableError(w, target)
        reached.append(lbar)
    base = reached[ws.index(1)]
    return SpeedupReport(ws, reached, [base / x for x in reached], target=float(target))


def time_speedup(times: Mapping[int, float]) -> Dict[int, float]:
    """Wall-clock time for one worker over time for W workers (informational)."""
    base = times[1]
    return {w: base / t for w, t in sorted(times.items())}
