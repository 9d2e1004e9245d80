"""Synthetic benchmarks: data generation, metrics, warm starts, and the
replication harnesses behind the reproduction pipelines.

Protocol defaults follow the benchmark recipe used throughout: designs
with AR(1) row covariance varrho^|i-j|, ten-coordinate signals with
magnitudes in (6,7) and random signs, n = p/2, u=1.5, rho0=n, rho1=1,
J=100 for the exact sampler, Niter = max(2000, p-2000) with the last
1000 iterations kept.  The asynchronous screening batch defaults to
J = 0.04*n (the alpha*n guideline): screening-mask leakage makes the
asynchronous limit degrade when J is a large fraction of n, while very
small J cannot clean up the initial transient within the iteration
budget.
"""

import json
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .coupling import bound_from_taus, run_coupled_pair
from .kernels import KernelConfig
from .models import RegressionData, make_model
from .posterior import Hyperparams
from .rngtools import substream
from .samplers import SamplerConfig, run_chain
from .sparsity import SparsityVector

__all__ = [
    "SyntheticSpec",
    "ExperimentReport",
    "generate_design",
    "generate_signal",
    "generate_response",
    "make_dataset",
    "relative_error",
    "support_frequencies",
    "penalized_test_loglik",
    "lasso_warm_start",
    "protocol_hyperparams",
    "default_niter",
    "async_screen_size",
    "run_experiment",
]

EXPERIMENT_KINDS = ("mixing_vs_p", "relative_error", "pen_loglik_paths", "runtime_table")


def _fmt(x):
    return format(float(x), ".17g")


def _pin_blas_single_thread():
    # Keeps per-call BLAS reduction order independent of worker count.
    try:
        from threadpoolctl import threadpool_limits

        return threadpool_limits(limits=1)
    except ImportError:  # pragma: no cover
        return None


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic regression dataset."""

    n: int
    p: int
    varrho: float = 0.0
    s_star: int = 10
    signal_low: float = 6.0
    signal_high: float = 7.0
    model: str = "linear"
    sigma: float = 1.0
    normalize_columns: bool = False
    seed: int = 0

    def __post_init__(self):
        if not (self.n >= 1 and self.p >= 1):
            raise ValueError("n and p must be positive")
        if not 0 <= self.varrho < 1:
            raise ValueError("varrho must lie in [0, 1)")
        if not 1 <= self.s_star <= self.p:
            raise ValueError("s_star must lie in [1, p]")
        if not self.signal_low < self.signal_high:
            raise ValueError("need signal_low < signal_high")
        if self.model not in ("linear", "logistic"):
            raise ValueError("model must be linear or logistic")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


def generate_design(spec, rng):
    """n x p design with i.i.d. rows from the AR(1) covariance varrho^|i-j|.

    Built by the AR recursion x_1 = z_1, x_j = varrho*x_{j-1} +
    sqrt(1-varrho^2)*z_j, which realizes the stationary covariance
    exactly.  Optionally rescales every column to length sqrt(n).
    """
    Z = rng.standard_normal((spec.n, spec.p))
    r = spec.varrho
    if r == 0.0:
        X = Z
    else:
        X = np.empty_like(Z)
        X[:, 0] = Z[:, 0]
        w = math.sqrt(1.0 - r * r)
        for j in range(1, spec.p):
            X[:, j] = r * X[:, j - 1] + w * Z[:, j]
    if spec.normalize_columns:
        X = X * (math.sqrt(spec.n) / np.linalg.norm(X, axis=0))
    return X


def generate_signal(spec, rng):
    """True coefficients: s_star positions, magnitudes in the signal band,
    signs uniform; returns (theta_star, delta_star)."""
    positions = np.sort(rng.choice(spec.p, size=spec.s_star, replace=False))
    mags = rng.uniform(spec.signal_low, spec.signal_high, size=spec.s_star)
    signs = rng.integers(0, 2, size=spec.s_star) * 2 - 1
    theta = np.zeros(spec.p)
    theta[positions] = mags * signs
    return theta, SparsityVector.from_support(spec.p, positions)


def generate_response(spec, X, theta_star, rng):
    mu = X @ theta_star
    if spec.model == "linear":
        return mu + spec.sigma * rng.standard_normal(spec.n)
    return (rng.random(spec.n) < expit(mu)).astype(np.float64)


def make_dataset(spec, theta_star=None, stream_scope=("data",)):
    """Design + response from the spec's own seed (signal drawn unless given)."""
    if theta_star is None:
        theta_star, _ = generate_signal(spec, substream(spec.seed, *stream_scope, "signal"))
    X = generate_design(spec, substream(spec.seed, *stream_scope, "design"))
    y = generate_response(spec, X, theta_star, substream(spec.seed, *stream_scope, "response"))
    return RegressionData(X, y, spec.sigma**2), theta_star


def relative_error(trace, theta_star, burn_in):
    """Post-burn-in average of |theta_k * delta_k - theta*| / |theta*|."""
    norm_star = np.linalg.norm(theta_star)
    if norm_star == 0:
        raise ValueError("relative error is undefined for a zero true signal")
    kept = [(b, t) for (it, b, t) in trace.snapshots if it > burn_in]
    if not kept:
        raise ValueError("burn-in leaves no recorded iterations")
    errs = [np.linalg.norm(t * b - theta_star) / norm_star for b, t in kept]
    return float(np.mean(errs))


def support_frequencies(trace, burn_in):
    """Per-coordinate inclusion frequency over post-burn-in snapshots."""
    kept = [b for (it, b, _) in trace.snapshots if it > burn_in]
    if not kept:
        raise ValueError("burn-in leaves no recorded iterations")
    return np.mean(kept, axis=0)


def penalized_test_loglik(kind, test_data, theta, delta, h):
    """Held-out fit score: model log-likelihood at theta*delta minus the
    slab quadratic penalty rho1/2 * |theta_delta|^2."""
    sup = delta.support
    active = theta[sup]
    mu = test_data.X[:, sup] @ active if sup.size else np.zeros(test_data.n)
    pen = 0.5 * h.rho1 * float(active @ active)
    if kind == "linear":
        r = test_data.y - mu
        return -0.5 * float(r @ r) / test_data.sigma2 - pen
    if kind == "logistic":
        return float(test_data.y @ mu - np.logaddexp(0.0, mu).sum()) - pen
    raise ValueError(f"unknown model kind {kind!r}")


@dataclass
class LassoResult:
    theta: np.ndarray
    support: np.ndarray
    converged: bool
    iterations: int


def lasso_warm_start(data, lam=None, max_iters=1000, tol=1e-6, kind="linear"):
    """ISTA minimizer of mean negative log-likelihood + lam*|theta|_1.

    lam defaults to std(y) * sqrt(2 log p / n).  Non-convergence returns
    the best iterate with converged=False.
    """
    n, p = data.n, data.p
    if lam is None:
        lam = float(np.std(data.y)) * math.sqrt(2.0 * math.log(p) / n)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    X, y = data.X, data.y
    op_norm_sq = np.linalg.norm(X, ord=2) ** 2
    if kind == "linear":
        lip = op_norm_sq / (n * data.sigma2)

        def grad(theta):  # of the mean negative log-likelihood
            return -(X.T @ (y - X @ theta)) / (n * data.sigma2)

    elif kind == "logistic":
        lip = op_norm_sq / (4.0 * n)

        def grad(theta):
            return -(X.T @ (y - expit(X @ theta))) / n

    else:
        raise ValueError(f"unknown model kind {kind!r}")

    step = 1.0 / lip
    theta = np.zeros(p)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        z = theta - step * grad(theta)
        new = np.sign(z) * np.maximum(np.abs(z) - step * lam, 0.0)
        move = np.linalg.norm(new - theta)
        theta = new
        if move <= tol * (1.0 + np.linalg.norm(theta)):
            converged = True
            break
    return LassoResult(theta, np.flatnonzero(theta != 0), converged, it)


def protocol_hyperparams(n, J=100, B=None, gamma=0.005, mala_step=0.01):
    """Benchmark-protocol knobs: u=1.5, rho0=n, rho1=1."""
    return Hyperparams(u=1.5, rho0=float(n), rho1=1.0, J=J, B=B,
                       gamma=gamma, mala_step=mala_step)


def default_niter(p):
    return max(2000, p - 2000)


def async_screen_size(n, frac=0.04):
    """Guideline screening size J = alpha*n for the asynchronous samplers."""
    return max(1, round(frac * n))


def _lasso_init(data, p, kind):
    fit = lasso_warm_start(data, kind=kind)
    bits = np.zeros(p, dtype=np.uint8)
    bits[fit.support] = 1
    return (fit.theta, SparsityVector(bits))


def _sampler_setup(algo, model_kind, niter, J_exact, J_async, B,
                   mala_step=0.01, sgld_step=0.005):
    """(SamplerConfig, J) for one algorithm arm of a benchmark run."""
    if algo == "sa_sgld":
        kern = KernelConfig("sgld", step=sgld_step, batch_size=B)
        return SamplerConfig("sa_sgld", kern, niter, J=J_async), J_async
    kern = (KernelConfig("exact_gaussian") if model_kind == "linear"
            else KernelConfig("mala", step=mala_step))
    J = J_exact if algo == "exact" else J_async
    return SamplerConfig(algo, kern, niter, J=J), J


class _Checkpoint:
    """Replica-level resume store (JSON lines keyed by replica id).

    Completed replicas are replayed from disk on a rerun, so a partially
    failed pipeline keeps its finished work; the file doubles as the
    resume marker and is removed once the stage completes.
    """

    def __init__(self, path):
        self.path = path
        self._lock = threading.Lock()
        self._done = {}
        if path and os.path.exists(path):
            with open(path) as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        self._done[rec["replica"]] = rec["result"]

    def run(self, fn, r):
        if self.path is None:
            return fn(r)
        if r in self._done:
            return self._done[r]
        result = fn(r)
        with self._lock:
            with open(self.path, "a") as fh:
                fh.write(json.dumps({"replica": r, "result": result}) + "\n")
        return result

    def clear(self):
        if self.path and os.path.exists(self.path):
            os.remove(self.path)


def _map_replicas(fn, n_reps, threads, checkpoint=None):
    ck = checkpoint or _Checkpoint(None)
    call = lambda r: ck.run(fn, r)
    if threads <= 1:
        out = [call(r) for r in range(n_reps)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(call, range(n_reps)))
    return out


@dataclass
class ExperimentReport:
    """Per-replication rows plus the effective configuration echo."""

    kind: str
    header: dict
    tables: dict = field(default_factory=dict)  # name -> (columns, rows)
    extras: dict = field(default_factory=dict)

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        for name, (cols, rows) in self.tables.items():
            with open(os.path.join(out_dir, f"{name}.csv"), "w", newline="") as fh:
                fh.write(",".join(cols) + "\n")
                for row in rows:
                    fh.write(",".join(str(v) for v in row) + "\n")
        with open(os.path.join(out_dir, "report_config.txt"), "w") as fh:
            for k in sorted(self.header):
                fh.write(f"{k} = {self.header[k]}\n")


def _mixing_vs_p(config, seed, threads):
    p_grid = tuple(config.get("p_grid", (200, 400, 800)))
    reps = int(config.get("reps", 50))
    lag = int(config.get("lag", 1))
    eps = float(config.get("eps", 0.25))
    max_iters = int(config.get("max_iters", 20000))
    varrho = float(config.get("varrho", 0.0))
    J = int(config.get("J", 100))
    rows = []
    tmix_by_p = {}
    for p in p_grid:
        n = p // 2
        spec = SyntheticSpec(n=n, p=p, varrho=varrho, seed=seed)
        theta_star, _ = generate_signal(spec, substream(seed, "mixing", p, "signal"))
        h = protocol_hyperparams(n, J=min(J, p))
        cfg = SamplerConfig("exact", KernelConfig("exact_gaussian"), total_iters=0)

        def one(r, p=p, spec=spec, theta_star=theta_star, h=h, cfg=cfg):
            data, _ = make_dataset(spec, theta_star, stream_scope=("mixing", p, "rep", r))
            model = make_model("linear", data)
            tr = run_coupled_pair(model, h, cfg, lag, max_iters, seed,
                                  scope=("mixing", p, "rep", r))
            return [tr.tau_for_bound, int(tr.censored)]

        base = config.get("checkpoint")
        ck = _Checkpoint(f"{base}.p{p}" if base else None)
        results = _map_replicas(one, reps, threads, ck)
        taus = np.array([r[0] for r in results], dtype=np.float64)
        t_grid = np.arange(0, int(taus.max()) - lag + 2)
        bound, _ = bound_from_taus(taus, lag, t_grid)
        hit = np.flatnonzero(bound <= eps)
        tmix = int(t_grid[hit[0]]) if hit.size else None
        tmix_by_p[p] = (tmix, taus)
        for r, res in enumerate(results):
            rows.append([p, r, int(res[0]), tmix])
        ck.clear()
    header = {
        "kind": "mixing_vs_p", "seed": seed, "p_grid": p_grid, "reps": reps,
        "lag": lag, "eps": eps, "u": 1.5, "rho0": "n", "rho1": 1.0,
        "J": J, "varrho": varrho,
    }
    report = ExperimentReport("mixing_vs_p", header)
    report.tables["mixing"] = (["p", "replica", "tau", "t_mix"], rows)
    report.extras["tmix_by_p"] = tmix_by_p
    return report


def _relative_error(config, seed, threads):
    p = int(config.get("p", 1000))
    n = int(config.get("n", p // 2))
    varrho = float(config.get("varrho", 0.0))
    model_kind = config.get("model", "linear")
    reps = int(config.get("reps", 10))
    niter = int(config.get("niter", default_niter(p)))
    burn = int(config.get("burn_in", max(0, niter - 1000)))
    J_exact = min(int(config.get("J_exact", 100)), p)
    J_async = min(int(config.get("J_async", async_screen_size(n))), p)
    B = min(int(config.get("B", 100)), n)
    algos = tuple(config.get("algorithms",
                             ("exact", "async", "sa_sgld") if model_kind == "logistic"
                             else ("exact", "async")))
    spec = SyntheticSpec(n=n, p=p, varrho=varrho, model=model_kind, seed=seed,
                         s_star=int(config.get("s_star", 10)))
    theta_star, delta_star = generate_signal(spec, substream(seed, "relerr", "signal"))

    def one(r):
        data, _ = make_dataset(spec, theta_star, stream_scope=("relerr", "rep", r))
        model = make_model(model_kind, data)
        init = "null_model" if model_kind == "linear" else _lasso_init(data, p, model_kind)
        out = {}
        for algo in algos:
            cfg, J = _sampler_setup(algo, model_kind, niter, J_exact, J_async, B)
            cfg = replace(cfg, init=init)
            h = protocol_hyperparams(n, J=J, B=B)
            tr = run_chain(cfg, model, h, seed, scope=("relerr", "rep", r, algo))
            out[algo] = [relative_error(tr, theta_star, burn),
                         support_frequencies(tr, burn).tolist()]
        return out

    ck = _Checkpoint(config.get("checkpoint"))
    results = _map_replicas(one, reps, threads, ck)
    rows = []
    for r, res in enumerate(results):
        for algo in algos:
            rows.append([p, _fmt(varrho), algo, r, _fmt(res[algo][0])])
    ck.clear()
    header = {
        "kind": "relative_error", "seed": seed, "p": p, "n": n, "varrho": varrho,
        "model": model_kind, "reps": reps, "niter": niter, "burn_in": burn,
        "u": 1.5, "rho0": n, "rho1": 1.0, "J_exact": J_exact, "J_async": J_async,
        "s_star": spec.s_star, "signal_band": (spec.signal_low, spec.signal_high),
        "algorithms": algos,
    }
    report = ExperimentReport("relative_error", header)
    report.tables["relerr"] = (["p", "varrho", "algorithm", "replica", "E"], rows)
    report.extras["results"] = results
    report.extras["true_support"] = delta_star.support.tolist()
    return report


def _pen_loglik_paths(config, seed, threads):
    p = int(config.get("p", 1000))
    n = int(config.get("n", p // 2))
    varrho = float(config.get("varrho", 0.0))
    reps = int(config.get("reps", 10))
    niter = int(config.get("niter", default_niter(p)))
    model_kind = config.get("model", "linear")
    J_exact = min(int(config.get("J_exact", 100)), p)
    J_async = min(int(config.get("J_async", async_screen_size(n))), p)
    B = min(int(config.get("B", 100)), n)
    algos = tuple(config.get("algorithms",
                             ("exact", "async", "sa_sgld") if model_kind == "logistic"
                             else ("exact", "async")))
    spec = SyntheticSpec(n=n, p=p, varrho=varrho, model=model_kind, seed=seed,
                         s_star=int(config.get("s_star", 10)))
    theta_star, _ = generate_signal(spec, substream(seed, "paths", "signal"))

    def one(r):
        # Fresh training and test data per replication, same true signal.
        data, _ = make_dataset(spec, theta_star, stream_scope=("paths", "rep", r, "train"))
        test_data, _ = make_dataset(spec, theta_star, stream_scope=("paths", "rep", r, "test"))
        model = make_model(model_kind, data)
        init = "null_model" if model_kind == "linear" else _lasso_init(data, p, model_kind)
        paths = {}
        for algo in algos:
            cfg, J = _sampler_setup(algo, model_kind, niter, J_exact, J_async, B)
            cfg = replace(cfg, init=init)
            h = protocol_hyperparams(n, J=J, B=B)
            tr = run_chain(cfg, model, h, seed, test_data=test_data,
                           scope=("paths", "rep", r, algo))
            paths[algo] = tr.test_pen_loglik.tolist()
        return paths

    ck = _Checkpoint(config.get("checkpoint"))
    results = _map_replicas(one, reps, threads, ck)
    rows = []
    for algo in algos:
        mean_path = np.mean([res[algo] for res in results], axis=0)
        for k, v in enumerate(mean_path):
            rows.append([algo, k, _fmt(v)])
    ck.clear()
    header = {
        "kind": "pen_loglik_paths", "seed": seed, "p": p, "n": n, "varrho": varrho,
        "reps": reps, "niter": niter, "model": model_kind, "u": 1.5, "rho0": n,
        "rho1": 1.0, "J_exact": J_exact, "J_async": J_async, "B": B,
        "algorithms": algos,
    }
    report = ExperimentReport("pen_loglik_paths", header)
    report.tables["paths"] = (["algorithm", "iteration", "mean_pen_loglik"], rows)
    return report


def _runtime_table(config, seed, threads):
    # Wall time of the sampling loop only; data generation, warm start and
    # I/O are excluded.  Replications run sequentially for clean timings.
    p_grid = tuple(config.get("p_grid", (1000,)))
    reps = int(config.get("reps", 3))
    iters = int(config.get("iters", 1000))
    rows = []
    timings = {}
    for p in p_grid:
        n = p // 2
        B = min(int(config.get("B", 100)), n)
        J_exact = min(int(config.get("J_exact", 100)), p)
        spec = SyntheticSpec(n=n, p=p, model="logistic", seed=seed)
        theta_star, _ = generate_signal(spec, substream(seed, "runtime", p, "signal"))
        data, _ = make_dataset(spec, theta_star, stream_scope=("runtime", p))
        model = make_model("logistic", data)
        init = _lasso_init(data, p, "logistic")
        J_async = min(int(config.get("J_async", async_screen_size(n))), p)
        for algo in ("exact", "async", "sa_sgld"):
            cfg, J = _sampler_setup(algo, "logistic", iters, J_exact, J_async, B)
            cfg = replace(cfg, init=init)
            h = protocol_hyperparams(n, J=J, B=B)
            run_chain(replace(cfg, total_iters=min(20, iters)), model, h, seed,
                      scope=("runtime", p, algo, "warmup"))
            secs = []
            for r in range(reps):
                t0 = time.perf_counter()
                run_chain(cfg, model, h, seed, scope=("runtime", p, algo, r))
                secs.append(time.perf_counter() - t0)
            mean_s = float(np.mean(secs))
            sd_s = float(np.std(secs, ddof=1)) if reps > 1 else 0.0
            rows.append([algo, p, _fmt(mean_s), _fmt(sd_s)])
            timings[(algo, p)] = secs
    header = {
        "kind": "runtime_table", "seed": seed, "p_grid": p_grid, "reps": reps,
        "iters": iters, "model": "logistic", "mala_step": 0.01,
        "sgld_step": 0.005, "B": B, "u": 1.5, "rho0": "n", "rho1": 1.0,
        "J_exact": J_exact,
    }
    report = ExperimentReport("runtime_table", header)
    report.tables["runtime"] = (["algorithm", "p", "mean_s", "sd_s"], rows)
    report.extras["timings"] = timings
    return report


_RUNNERS = {
    "mixing_vs_p": _mixing_vs_p,
    "relative_error": _relative_error,
    "pen_loglik_paths": _pen_loglik_paths,
    "runtime_table": _runtime_table,
}


def run_experiment(kind, config, seed, out_dir=None, threads=1):
    """Execute the named replication protocol; optionally write its CSVs.

    Deterministic given (kind, config, seed) for any thread count; the
    runtime table's timing columns are measurements and necessarily vary.
    """
    if kind not in _RUNNERS:
        raise ValueError(f"unknown experiment kind {kind!r}; valid: {EXPERIMENT_KINDS}")
    guard = _pin_blas_single_thread()
    try:
        report = _RUNNERS[kind](dict(config), int(seed), int(threads))
    finally:
        if guard is not None:
            guard.restore_original_limits()
    report.header["threads"] = threads
    if out_dir is not None:
        report.write(out_dir)
    return report
