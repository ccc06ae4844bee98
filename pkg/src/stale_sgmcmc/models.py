"""Probabilistic models, their stochastic gradients and exact oracles.

Two models are provided:

* ``GaussianModel``: d_i ~ N(theta, 1), theta ~ N(0, 1).  Conjugate, so the
  posterior is known in closed form and serves as the ground truth for
  bias/MSE measurements.
* ``LogisticRegressionModel``: y_i ~ Bernoulli(sigmoid(theta . x_i)) with a
  N(0, I) prior.

All gradients are of the *negative* log-posterior U(theta), matching the
sign convention of the sampler kernels.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import sparse
from scipy.integrate import simpson
from scipy.optimize import minimize_scalar
from scipy.special import expit

from .errors import (
    InvalidMinibatchError,
    LibsvmParseError,
    ModelMismatchError,
    UnsupportedDimensionError,
    UnsupportedLabelError,
    UnsupportedOracleError,
)
from .rng import stream

A9A_N_FEATURES = 123
DATA_DIR = Path(__file__).parent / "data"


def _frozen(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable collection of observations.

    ``x`` is a 1-d float array for the Gaussian model, or an (N, n_features)
    CSR matrix for logistic regression, in which case ``y`` holds 0/1 labels.
    """

    x: object
    y: Optional[np.ndarray] = None
    n_features: int = 1

    def __post_init__(self):
        if sparse.issparse(self.x):
            x = sparse.csr_matrix(self.x, dtype=np.float64)
            x.data.setflags(write=False)
            x.indices.setflags(write=False)
            x.indptr.setflags(write=False)
            if x.shape[1] != self.n_features:
                raise ModelMismatchError(f"matrix has {x.shape[1]} columns, expected {self.n_features}")
            object.__setattr__(self, "x", x)
        else:
            object.__setattr__(self, "x", _frozen(np.asarray(self.x, dtype=np.float64).reshape(-1)))
        if self.y is not None:
            y = np.asarray(self.y, dtype=np.int8).reshape(-1)
            if y.shape[0] != self.n_items:
                raise ModelMismatchError("label count does not match item count")
            if not np.isin(y, (0, 1)).all():
                raise ValueError("labels must be 0 or 1")
            object.__setattr__(self, "y", _frozen(y))

    @property
    def n_items(self) -> int:
        return self.x.shape[0]

    def __len__(self):
        return self.n_items

    def __eq__(self, other):
        if not isinstance(other, Dataset) or self.n_features != other.n_features:
            return NotImplemented
        if sparse.issparse(self.x) != sparse.issparse(other.x) or self.x.shape != other.x.shape:
            return False
        if sparse.issparse(self.x):
            same_x = (self.x != other.x).nnz == 0
        else:
            same_x = np.array_equal(self.x, other.x)
        if (self.y is None) != (other.y is None):
            return False
        return same_x and (self.y is None or np.array_equal(self.y, other.y))

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices)
        return Dataset(self.x[indices], None if self.y is None else self.y[indices], self.n_features)


@dataclass(frozen=True, eq=False)
class Minibatch:
    indices: np.ndarray
    n: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        j = idx.shape[0]
        if not 1 <= j <= self.n:
            raise InvalidMinibatchError(f"minibatch size {j} outside [1, {self.n}]")
        if idx.min() < 0 or idx.max() >= self.n:
            raise InvalidMinibatchError("minibatch index out of range")
        if np.unique(idx).shape[0] != j:
            raise InvalidMinibatchError("minibatch indices must be distinct")
        object.__setattr__(self, "indices", _frozen(idx))

    @property
    def size(self) -> int:
        return self.indices.shape[0]


def sample_minibatch(n, j, rng) -> Minibatch:
    """Draw ``j`` distinct indices from ``range(n)`` uniformly without replacement."""
    if j < 1 or j > n:
        raise InvalidMinibatchError(f"cannot draw a minibatch of {j} from {n} items")
    return Minibatch(rng.choice(n, size=j, replace=False), n)


def draw_indices(n, j, rng):
    # Unvalidated hot-loop variant of sample_minibatch; same rng consumption.
    return rng.choice(n, size=j, replace=False)


class GaussianModel:
    """d_i ~ N(theta, 1) with prior theta ~ N(0, 1)."""

    dim = 1
    name = "gaussian"

    def __init__(self, data: Dataset):
        if sparse.issparse(data.x) or data.y is not None:
            raise ModelMismatchError("GaussianModel needs scalar observations")
        self.data = data
        self._d = data.x
        self._n = data.n_items
        self._sum = float(self._d.sum())

    @property
    def n_items(self):
        return self.data.n_items

    def grad_log_prior(self, theta):
        return -theta

    def grad_log_lik_sum(self, theta, indices):
        d = self._d[indices]
        return d.sum() - d.shape[0] * theta

    def full_grad_log_lik(self, theta):
        return np.array([self._sum - self.n_items * theta[0]])

    def minibatch_gradient(self, theta, indices):
        # Same arithmetic as the generic form, done on Python floats: size-1
        # array operations dominate the per-step cost otherwise.
        t = float(theta[0])
        j = indices.shape[0]
        return np.array([t - (self._n / j) * (float(np.add.reduce(self._d[indices])) - j * t)])

    def neg_log_posterior(self, theta):
        t = float(np.asarray(theta).reshape(-1)[0])
        return 0.5 * t * t + 0.5 * float(np.sum((self._d - t) ** 2))

    def neg_log_posterior_grid(self, ts):
        """U evaluated at many scalar parameters at once."""
        ts = np.asarray(ts, dtype=np.float64)
        d = self._d
        if d.shape[0] == 0:
            return 0.5 * ts**2
        # sum (d - t)^2 = sum (d - dbar)^2 + N (dbar - t)^2
        dbar = d.mean()
        spread = float(np.sum((d - dbar) ** 2))
        return 0.5 * ts**2 + 0.5 * (spread + d.shape[0] * (dbar - ts) ** 2)


class LogisticRegressionModel:
    """Bayesian logistic regression with a zero-mean unit-variance Gaussian prior."""

    name = "blr"

    def __init__(self, data: Dataset):
        if data.y is None:
            raise ModelMismatchError("LogisticRegressionModel needs labelled data")
        self.data = data
        self.dim = data.n_features
        x = data.x
        # a9a is tiny in feature count; dense rows make minibatch slicing cheap
        self._x = x.toarray() if sparse.issparse(x) else np.asarray(x).reshape(-1, self.dim)
        self._y = data.y.astype(np.float64)

    @property
    def n_items(self):
        return self.data.n_items

    def grad_log_prior(self, theta):
        return -theta

    def grad_log_lik_sum(self, theta, indices):
        xb = self._x[indices]
        return xb.T @ (self._y[indices] - expit(xb @ theta))

    def full_grad_log_lik(self, theta):
        return self._x.T @ (self._y - expit(self._x @ theta))

    def neg_log_posterior(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        z = self._x @ theta
        return 0.5 * float(theta @ theta) + float(np.sum(np.logaddexp(0.0, z) - self._y * z))


def _check_theta(model, theta):
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.shape[0] != model.dim:
        raise ModelMismatchError(f"parameter has dimension {theta.shape[0]}, model expects {model.dim}")
    return theta


def stochastic_gradient(model, theta, batch: Minibatch):
    """-grad log p(theta) - (N/J) * sum_{i in batch} grad log p(d_i | theta)."""
    theta = _check_theta(model, theta)
    if batch.n != model.n_items:
        raise ModelMismatchError(f"minibatch drawn from {batch.n} items, model has {model.n_items}")
    scale = model.n_items / batch.size
    return -model.grad_log_prior(theta) - scale * model.grad_log_lik_sum(theta, batch.indices)


def minibatch_gradient(model, theta, indices):
    # Hot-loop form of stochastic_gradient without argument checks; models
    # may provide a specialised version.
    fast = getattr(model, "minibatch_gradient", None)
    if fast is not None:
        return fast(theta, indices)
    return -model.grad_log_prior(theta) - (model.n_items / indices.shape[0]) * model.grad_log_lik_sum(theta, indices)


def full_gradient(model, theta):
    theta = _check_theta(model, theta)
    if model.n_items == 0:
        return -model.grad_log_prior(theta)
    return -model.grad_log_prior(theta) - model.full_grad_log_lik(theta)


def gradient_noise_diagnostics(model, theta, j, rng, n_draws=1000, n_pairs=50, radius=1.0):
    """Empirical stand-ins for the gradient-noise bound and Lipschitz constant.

    Returns a dict with ``sigma2`` (mean squared deviation of minibatch
    gradients from the full gradient at ``theta``) and ``lipschitz`` (largest
    observed ratio |grad U(x) - grad U(y)| / |x - y| on random pairs around
    ``theta``).  Diagnostic only.
    """
    theta = _check_theta(model, theta)
    full = full_gradient(model, theta)
    dev = [np.sum((minibatch_gradient(model, theta, draw_indices(model.n_items, j, rng)) - full) ** 2)
           for _ in range(n_draws)]
    ratios = []
    for _ in range(n_pairs):
        a = theta + radius * rng.standard_normal(model.dim)
        b = theta + radius * rng.standard_normal(model.dim)
        gap = np.linalg.norm(a - b)
        if gap > 0:
            ratios.append(np.linalg.norm(full_gradient(model, a) - full_gradient(model, b)) / gap)
    return {"sigma2": float(np.mean(dev)), "lipschitz": float(max(ratios))}


# -- data -------------------------------------------------------------------

def generate_gaussian_data(theta_true, n, seed) -> Dataset:
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = stream(seed, "data")
    return Dataset(rng.normal(loc=float(theta_true), scale=1.0, size=int(n)))


def parse_libsvm(path, n_features=None) -> Dataset:
    """Read a binary-label LIBSVM file (1-based ``idx:val`` pairs).

    Labels -1/+1 (or 0/1) become 0/1.  ``n_features`` pins the column count
    so a train/test pair share a dimension even if the test file never
    touches the highest feature index.
    """
    path = Path(path)
    rows, cols, vals, labels = [], [], [], []
    max_idx = 0
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise LibsvmParseError(path, line_no, f"bad label {tokens[0]!r}") from None
            if label in (1.0,):
                labels.append(1)
            elif label in (-1.0, 0.0):
                labels.append(0)
            else:
                raise UnsupportedLabelError(path, line_no, f"non-binary label {tokens[0]!r}")
            row = len(labels) - 1
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                try:
                    if not sep:
                        raise ValueError
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise LibsvmParseError(path, line_no, f"bad feature token {tok!r}") from None
                if idx < 1:
                    raise LibsvmParseError(path, line_no, f"feature index {idx} is not 1-based")
                if not math.isfinite(val):
                    raise LibsvmParseError(path, line_no, f"non-finite feature value {val_s!r}")
                max_idx = max(max_idx, idx)
                rows.append(row)
                cols.append(idx - 1)
                vals.append(val)
    if n_features is None:
        n_features = max_idx
    elif max_idx > n_features:
        raise LibsvmParseError(path, 0, f"feature index {max_idx} exceeds n_features={n_features}")
    x = sparse.csr_matrix((vals, (rows, cols)), shape=(len(labels), n_features), dtype=np.float64)
    x.sum_duplicates()
    return Dataset(x, np.array(labels, dtype=np.int8), n_features)


def write_libsvm(data: Dataset, path):
    x = sparse.csr_matrix(data.x)
    with open(path, "w") as fh:
        for i in range(data.n_items):
            start, end = x.indptr[i], x.indptr[i + 1]
            feats = " ".join(f"{c + 1}:{v:g}" for c, v in zip(x.indices[start:end], x.data[start:end]))
            label = "+1" if data.y[i] == 1 else "-1"
            fh.write(f"{label} {feats}".rstrip() + "\n")


def desk_subset(data: Dataset, n, seed) -> Dataset:
    """Deterministic seeded subsample of ``n`` items (the whole set if n >= N or n <= 0)."""
    if n <= 0 or n >= data.n_items:
        return data
    idx = np.sort(stream(seed, "subsample").choice(data.n_items, size=n, replace=False))
    return data.subset(idx)


def bundled_blr_paths():
    """Paths to the bundled desk-scale train/test LIBSVM files."""
    return DATA_DIR / "a9a_desk.train", DATA_DIR / "a9a_desk.test"


# -- test functions ---------------------------------------------------------

class TestFunctionKind(enum.Enum):
    THETA_SQUARED = "theta_squared"
    LOGISTIC_LOSS = "logistic_loss"


@dataclass(frozen=True)
class TestFunction:
    __test__ = False  # keep pytest from collecting this class

    kind: TestFunctionKind
    held_out: Optional[Dataset] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind is TestFunctionKind.LOGISTIC_LOSS:
            if self.held_out is None:
                raise ValueError("logistic loss needs a held-out dataset")
            object.__setattr__(self, "_test_x", LogisticRegressionModel(self.held_out)._x)

    def __call__(self, theta) -> float:
        if self.kind is TestFunctionKind.THETA_SQUARED:
            if theta.shape[0] != 1:
                raise UnsupportedDimensionError("theta squared is defined for scalar parameters")
            t = theta[0]
            return float(t * t)
        z = self._test_x @ theta
        return float(np.sum(np.logaddexp(0.0, z) - self.held_out.y * z))


def theta_squared() -> TestFunction:
    return TestFunction(TestFunctionKind.THETA_SQUARED)


def logistic_loss(test: Dataset) -> TestFunction:
    return TestFunction(TestFunctionKind.LOGISTIC_LOSS, test)


def logistic_test_loss(theta, test: Dataset) -> float:
    """Sum over the held-out set of log(1 + exp(theta.x)) - y * theta.x."""
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.shape[0] != test.n_features:
        raise ModelMismatchError(f"parameter has dimension {theta.shape[0]}, data has {test.n_features} features")
    z = test.x @ theta
    z = np.asarray(z).reshape(-1)
    return float(np.sum(np.logaddexp(0.0, z) - test.y * z))


# -- posterior oracles ------------------------------------------------------

@dataclass(frozen=True)
class PosteriorSummary:
    mean: float
    variance: float
    phi_bar: float


def gaussian_posterior_summary(data, phi: TestFunction) -> PosteriorSummary:
    """Conjugate posterior N(S/(N+1), 1/(N+1)) and the exact mean of theta^2."""
    if isinstance(data, GaussianModel):
        data = data.data
    if not isinstance(data, Dataset) or sparse.issparse(data.x) or data.y is not None:
        raise UnsupportedOracleError("closed-form oracle exists only for the Gaussian model")
    if getattr(phi, "kind", None) is not TestFunctionKind.THETA_SQUARED:
        raise UnsupportedOracleError("closed-form oracle supports only theta squared")
    precision = data.n_items + 1
    mean = float(data.x.sum()) / precision
    variance = 1.0 / precision
    return PosteriorSummary(mean, variance, variance + mean * mean)


def quadrature_posterior_average(model, phi: Callable, n_nodes=10001, width=10.0) -> float:
    """Brute-force posterior average of ``phi`` by composite Simpson quadrature.

    The grid is centred on the numerically located mode and spans
    ``width`` curvature-derived standard deviations either side.  Nothing
    here uses the conjugate formulas.
    """
    if model.dim != 1:
        raise UnsupportedDimensionError("quadrature oracle needs a scalar parameter")
    nlp = lambda t: model.neg_log_posterior(np.array([t]))
    # bracket wide enough for any data mean of a standard-normal-ish sample
    mode = minimize_scalar(nlp, bracket=(-1.0, 1.0), tol=1e-12).x
    eps = 1e-3
    curv = (nlp(mode + eps) - 2 * nlp(mode) + nlp(mode - eps)) / eps**2
    sd = 1.0 / math.sqrt(curv)
    grid = np.linspace(mode - width * sd, mode + width * sd, n_nodes)
    u0 = nlp(mode)
    if hasattr(model, "neg_log_posterior_grid"):
        u = model.neg_log_posterior_grid(grid)
    else:
        u = np.array([nlp(t) for t in grid])
    dens = np.exp(-(u - u0))
    vals = np.array([phi(np.array([t])) for t in grid])
    return float(simpson(vals * dens, x=grid) / simpson(dens, x=grid))
