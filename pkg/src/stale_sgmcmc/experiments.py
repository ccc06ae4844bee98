"""Experiment drivers that bind models, samplers, the simulator and metrics.

Every driver takes a validated ``ExperimentConfig`` and returns an
``ExperimentResult`` (rows plus a summary dict used by tests).  Writing the
rows to CSV is deterministic: replicates are always assembled in index
order, whether they ran serially or in a process pool.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, field, fields
from functools import partial
from pathlib import Path

import numpy as np

from .async_sim import SchedulePolicy, run_multi_server, run_single_server
from .config import ExperimentConfig, serialize_config
from .errors import ConfigError, InsufficientReplicatesError
from .metrics import (
    aggregate_chains,
    aggregation_weights,
    estimate_report,
    fingerprint,
    iteration_speedup,
    optimal_stepsize,
    running_averages,
    sample_average,
)
from .models import (
    A9A_N_FEATURES,
    GaussianModel,
    LogisticRegressionModel,
    bundled_blr_paths,
    desk_subset,
    gaussian_posterior_summary,
    generate_gaussian_data,
    logistic_loss,
    parse_libsvm,
    theta_squared,
)
from .rng import derive_seed
from .sampler import ChainConfig, FixedDelay, run_chain


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    tau: int
    workers: int
    servers: int
    step_size: float
    iterations: int
    record: str
    metric: str
    value: float
    sim_time: float
    config_fingerprint: str


ROW_HEADER = tuple(f.name for f in fields(ResultRow))
_ROW_TYPES = {"tau": int, "workers": int, "servers": int, "step_size": float, "iterations": int,
              "value": float, "sim_time": float}


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        self._fingerprint = config_fingerprint(self.config)

    def add(self, **kw):
        kw.setdefault("record", "aggregate")
        kw.setdefault("sim_time", float("nan"))
        self.rows.append(ResultRow(experiment=self.config.kind, config_fingerprint=self._fingerprint, **kw))


def config_fingerprint(cfg: ExperimentConfig) -> str:
    return fingerprint(serialize_config(cfg))


# -- CSV --------------------------------------------------------------------

def _cell(v):
    return repr(v) if isinstance(v, float) else str(v)


def render_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    for line in serialize_config(result.config).splitlines():
        buf.write(f"# {line}\n" if line else "#\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_HEADER)
    for row in result.rows:
        writer.writerow([_cell(v) for v in astuple(row)])
    return buf.getvalue()


def write_csv(result: ExperimentResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_csv(result))
    return path


def read_csv(path):
    """Return ``(config_text, rows)`` from a CSV written by ``write_csv``."""
    comments, body = [], []
    for line in Path(path).read_text().splitlines():
        (comments if line.startswith("#") else body).append(line)
    config_text = "\n".join(c[2:] if c.startswith("# ") else "" for c in comments)
    reader = csv.reader(body)
    header = tuple(next(reader))
    if header != ROW_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    rows = []
    for rec in reader:
        kw = {k: _ROW_TYPES.get(k, str)(v) for k, v in zip(header, rec)}
        rows.append(ResultRow(**kw))
    return config_text, rows


# -- shared plumbing --------------------------------------------------------

def geometric_checkpoints(total, count):
    """Up to ``count`` distinct integers geometrically spaced over [1, total], always ending at total."""
    pts = np.unique(np.round(np.geomspace(1, total, count)).astype(np.int64))
    return pts[pts >= 1]


def _map(fn, n, jobs):
    if jobs <= 1:
        return [fn(r) for r in range(n)]
    with ProcessPoolExecutor(jobs) as pool:
        return list(pool.map(fn, range(n), chunksize=max(1, n // (4 * jobs))))


def build_model(cfg: ExperimentConfig):
    """Return ``(model, phi, phi_bar)``; ``phi_bar`` is None when no closed form exists."""
    if cfg.model == "gaussian":
        model = GaussianModel(generate_gaussian_data(cfg.theta_true, cfg.n_items, cfg.data_seed))
        phi = theta_squared()
        return model, phi, gaussian_posterior_summary(model.data, phi).phi_bar
    train_path, test_path = bundled_blr_paths()
    train_path = cfg.train_path or train_path
    test_path = cfg.test_path or test_path
    n_features = cfg.n_features or A9A_N_FEATURES
    train = desk_subset(parse_libsvm(train_path, n_features), cfg.subset, cfg.data_seed)
    test = desk_subset(parse_libsvm(test_path, n_features), cfg.subset, cfg.data_seed + 1)
    return LogisticRegressionModel(train), logistic_loss(test), None


def _chain(cfg: ExperimentConfig, h, iterations, tau, seed):
    return ChainConfig(kind=cfg.kernel, step_size=h, friction=cfg.friction, minibatch=cfg.minibatch,
                       iterations=iterations, staleness_bound=tau, seed=seed)


def _policy(cfg: ExperimentConfig, workers, seed):
    means = None if cfg.policy == "round-robin" else [cfg.compute_mean] * workers
    dist = "exponential" if cfg.policy == "event-driven" else "constant"
    return SchedulePolicy(cfg.policy, means, dist, seed)


def _bound(cfg: ExperimentConfig, workers, iterations):
    if cfg.staleness_bound >= 0:
        return cfg.staleness_bound
    # round-robin staleness is exactly W - 1; other policies are left unbounded
    return workers - 1 if cfg.policy == "round-robin" else iterations


# -- synth-mse ----------------------------------------------------------------

def _synth_replicate(r, model, phi, chain, tau, checkpoints, base_seed):
    trace = run_chain(model, phi, chain.with_(seed=base_seed + r), FixedDelay(tau))
    return running_averages(trace.phi_values, checkpoints)


def cmd_synth_mse(cfg: ExperimentConfig, out=None, jobs=1) -> ExperimentResult:
    """MSE against iterations for L = L0 * tau with the MSE-optimal step size per tau."""
    model, phi, phi_bar = build_model(cfg)
    if phi_bar is None:
        raise ConfigError("key 'model': synth-mse needs the Gaussian model")
    res = ExperimentResult(cfg)
    endpoint, endpoint_mse = {}, {}
    for tau in cfg.taus:
        L = cfg.l0 * tau
        nominal = cfg.step_size if cfg.step_size is not None else optimal_stepsize(cfg.c, tau, L)
        h = cfg.kernel_step(nominal, model.n_items)
        cps = geometric_checkpoints(L, cfg.checkpoints)
        fn = partial(_synth_replicate, model=model, phi=phi, chain=_chain(cfg, h, L, tau, 0), tau=tau,
                     checkpoints=cps, base_seed=cfg.base_seed)
        est = np.array(_map(fn, cfg.replicates, jobs))  # (R, checkpoints)
        common = dict(tau=tau, workers=1, servers=1, step_size=h)
        res.add(iterations=L, metric="nominal_step", value=float(nominal), **common)
        for k, c in enumerate(cps):
            col = est[:, k]
            mse = float(np.mean((col - phi_bar) ** 2))
            res.add(iterations=int(c), metric="mse", value=mse, sim_time=float(c), **common)
            res.add(iterations=int(c), metric="bias", value=float(abs(col.mean() - phi_bar)), sim_time=float(c),
                    **common)
        for r, v in enumerate(est[:, -1]):
            res.add(iterations=L, record=str(r), metric="estimate", value=float(v), sim_time=float(L), **common)
        if cfg.replicates >= 2:
            rep = estimate_report(est[:, -1], phi_bar)
            res.add(iterations=L, metric="endpoint_variance", value=rep.variance, sim_time=float(L), **common)
            res.add(iterations=L, metric="endpoint_mse_se", value=rep.mse_standard_error, sim_time=float(L), **common)
            endpoint[tau] = rep
        else:
            endpoint[tau] = None
        endpoint_mse[tau] = float(np.mean((est[:, -1] - phi_bar) ** 2))
        res.add(iterations=L, metric="endpoint_mse", value=endpoint_mse[tau], sim_time=float(L), **common)
    res.summary = {"phi_bar": phi_bar, "endpoint_mse": endpoint_mse, "endpoint_report": endpoint}
    if out is not None:
        write_csv(res, out)
    return res


# -- variance-speedup -------------------------------------------------------------

def _speedup_replicate(r, model, phi, chain, workers, policy, lbar_checkpoints, base_seed):
    seed = base_seed + r
    trace = run_single_server(model, phi, chain.with_(seed=seed),
                              workers, SchedulePolicy(policy.kind, policy.compute_means, policy.distribution, seed))
    idx = lbar_checkpoints * workers
    return running_averages(trace.phi_values, idx), trace.sim_times[idx - 1], trace.phi_values[idx - 1]


def _worker_sweep(cfg, model, phi, jobs):
    """Run R replicates for every W; returns {W: (checkpoints, estimates, sim_times, instantaneous phi)}."""
    if cfg.step_size is None:
        raise ConfigError(f"{cfg.kind} needs an explicit step_size")
    h = cfg.kernel_step(cfg.step_size, model.n_items)
    lbar_cps = geometric_checkpoints(cfg.iterations, cfg.checkpoints)
    out = {}
    for w in cfg.workers:
        L = w * cfg.iterations
        chain = _chain(cfg, h, L, _bound(cfg, w, L), 0)
        fn = partial(_speedup_replicate, model=model, phi=phi, chain=chain, workers=w,
                     policy=_policy(cfg, w, 0), lbar_checkpoints=lbar_cps, base_seed=cfg.base_seed)
        parts = _map(fn, cfg.replicates, jobs)
        out[w] = (lbar_cps, np.array([p[0] for p in parts]), np.array([p[1] for p in parts]),
                  np.array([p[2] for p in parts]))
    return h, out


def auto_target(lbar_cps, variance_w1):
    """Mid-range target: the W=1 variance at the last checkpoint not beyond half the budget."""
    half = lbar_cps[-1] / 2.0
    k = int(np.searchsorted(lbar_cps, half, side="right")) - 1
    return float(variance_w1[max(k, 0)])


def cmd_variance_speedup(cfg: ExperimentConfig, out=None, jobs=1) -> ExperimentResult:
    """Variance of the sample average against per-worker iterations for each worker count."""
    model, phi, phi_bar = build_model(cfg)
    if cfg.replicates < 2:
        raise InsufficientReplicatesError("variance needs at least two replicates")
    res = ExperimentResult(cfg)
    h, sweep = _worker_sweep(cfg, model, phi, jobs)
    curves = {}
    for w, (cps, est, times, _) in sweep.items():
        var = est.var(axis=0, ddof=1)
        curves[w] = (cps.astype(float), var)
        for k, c in enumerate(cps):
            common = dict(tau=_bound(cfg, w, w * cfg.iterations), workers=w, servers=1, step_size=h,
                          iterations=int(c), sim_time=float(times[:, k].mean()))
            res.add(metric="variance", value=float(var[k]), **common)
            if phi_bar is not None:
                res.add(metric="mse", value=float(np.mean((est[:, k] - phi_bar) ** 2)), **common)
    target = cfg.target if cfg.target is not None else auto_target(*curves[1])
    report = iteration_speedup(curves, target)
    for w, lbar, s in zip(report.worker_counts, report.iterations_to_precision, report.iteration_speedup):
        common = dict(tau=_bound(cfg, w, w * cfg.iterations), workers=w, servers=1, step_size=h,
                      iterations=cfg.iterations)
        res.add(metric="target_variance", value=float(target), **common)
        res.add(metric="iterations_to_target", value=float(lbar), **common)
        res.add(metric="iteration_speedup", value=float(s), **common)
    res.summary = {"speedup": report, "curves": curves, "target": target,
                   "final_variance": {w: float(c[1][-1]) for w, c in curves.items()}}
    if out is not None:
        write_csv(res, out)
    return res


# -- multichain ---------------------------------------------------------------

def _multichain_replicate(r, model, phi, chain, servers, workers, policy, base_seed):
    seed = base_seed + r
    per_server = [(chain.with_(seed=derive_seed(seed, s)), workers,
                   SchedulePolicy(policy.kind, policy.compute_means, policy.distribution, derive_seed(seed, s, 1)))
                  for s in range(servers)]
    traces = run_multi_server(model, phi, per_server)
    estimates = [sample_average(t, chain.burn_in) for t in traces]
    spans = [(c.iterations, c.step_size) for c, _, _ in per_server]
    return aggregate_chains(estimates, spans), float(aggregation_weights(spans).sum()), estimates[0]


def cmd_multichain(cfg: ExperimentConfig, out=None, jobs=1) -> ExperimentResult:
    """Variance of the time-weighted multi-chain aggregate for each server count."""
    model, phi, phi_bar = build_model(cfg)
    if cfg.replicates < 2:
        raise InsufficientReplicatesError("variance needs at least two replicates")
    res = ExperimentResult(cfg)
    if cfg.step_size is None:
        raise ConfigError("multichain needs an explicit step_size")
    h = cfg.kernel_step(cfg.step_size, model.n_items)
    w = cfg.workers[0]
    chain = _chain(cfg, h, cfg.iterations, _bound(cfg, w, cfg.iterations), 0)
    variance, single = {}, {}
    for s in cfg.servers:
        fn = partial(_multichain_replicate, model=model, phi=phi, chain=chain, servers=s, workers=w,
                     policy=_policy(cfg, w, 0), base_seed=cfg.base_seed)
        parts = _map(fn, cfg.replicates, jobs)
        agg = np.array([p[0] for p in parts])
        first = np.array([p[2] for p in parts])
        common = dict(tau=chain.staleness_bound, workers=w, servers=s, step_size=h, iterations=cfg.iterations)
        for r, (a, wsum, _) in enumerate(parts):
            res.add(record=str(r), metric="aggregate_estimate", value=float(a), **common)
            res.add(record=str(r), metric="weight_sum", value=wsum, **common)
        variance[s] = float(agg.var(ddof=1))
        single[s] = float(first.var(ddof=1))
        res.add(metric="variance", value=variance[s], **common)
        res.add(metric="single_chain_variance", value=single[s], **common)
        if phi_bar is not None:
            rep = estimate_report(agg, phi_bar)
            res.add(metric="mse", value=rep.mse, **common)
            res.add(metric="bias", value=rep.bias, **common)
    base = variance[cfg.servers[0]] if 1 not in variance else variance[1]
    res.summary = {"variance": variance, "single_chain_variance": single,
                   "ratio": {s: v / base for s, v in variance.items()}}
    if out is not None:
        write_csv(res, out)
    return res


# -- blr ------------------------------------------------------------------------

def cmd_blr(cfg: ExperimentConfig, out=None, jobs=1) -> ExperimentResult:
    """Held-out logistic loss and its across-run variance against per-worker iterations."""
    model, phi, _ = build_model(cfg)
    res = ExperimentResult(cfg)
    h, sweep = _worker_sweep(cfg, model, phi, jobs)
    initial = phi(np.zeros(model.dim))
    summary = {"initial_loss": initial, "test_items": phi.held_out.n_items, "train_items": model.n_items,
               "final_loss": {}, "final_variance": {}}
    for w, (cps, est, times, inst) in sweep.items():
        common = dict(tau=_bound(cfg, w, w * cfg.iterations), workers=w, servers=1, step_size=h)
        res.add(iterations=0, metric="test_loss", value=float(initial), sim_time=0.0, **common)
        var = est.var(axis=0, ddof=1) if cfg.replicates >= 2 else np.full(len(cps), float("nan"))
        for k, c in enumerate(cps):
            kw = dict(common, iterations=int(c), sim_time=float(times[:, k].mean()))
            res.add(metric="test_loss", value=float(inst[:, k].mean()), **kw)
            res.add(metric="loss_average", value=float(est[:, k].mean()), **kw)
            res.add(metric="variance", value=float(var[k]), **kw)
        summary["final_loss"][w] = float(inst[:, -1].mean())
        summary["final_variance"][w] = float(var[-1])
    res.summary = summary
    if out is not None:
        write_csv(res, out)
    return res


COMMANDS = {
    "synth-mse": cmd_synth_mse,
    "variance-speedup": cmd_variance_speedup,
    "multichain": cmd_multichain,
    "blr": cmd_blr,
}


def run_experiment(cfg: ExperimentConfig, out=None, jobs=1) -> ExperimentResult:
    return COMMANDS[cfg.kind](cfg, out=out, jobs=jobs)


def staleness_ensemble(model, phi, chain: ChainConfig, tau, replicates, base_seed=0, jobs=1):
    """End-point sample averages of ``replicates`` fixed-delay chains (seeds base_seed + r)."""
    cps = np.array([chain.iterations])
    fn = partial(_synth_replicate, model=model, phi=phi, chain=chain.with_(staleness_bound=tau), tau=tau,
                 checkpoints=cps, base_seed=base_seed)
    return np.array(_map(fn, replicates, jobs))[:, 0]
