"""Outer-loop drivers: the exact sampler, the asynchronous sampler, and
sparse asynchronous SGLD.

Every iteration has the same two-phase shape.  Phase one refreshes the
inactive coordinates from the spike and moves the active coordinates
with the configured inner kernel.  Phase two screens a random batch of
J coordinates:

  exact    - sequential Gibbs, each bit drawn from its exact conditional
             (the probabilities change as bits flip within the sweep);
  async    - all J bits drawn independently from the gradient-based
             approximation, conditioning on the screening-masked state,
             which costs a single gradient evaluation;
  sa_sgld  - same as async, with the screening gradient estimated from a
             fresh data minibatch (and an SGLD kernel in phase one).

Randomness is split into named substreams (refresh / kernel / batch /
select / bern) so runs are reproducible and couplings can share exactly
the streams they need.  The asynchronous screening draws are aligned to
the sorted selection, making the result independent of any processing
order or schedule.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .posterior import (
    approx_inclusion_prob,
    exact_inclusion_prob,
    log_posterior_unnorm,
    screening_mask,
)
from .rngtools import substream
from .sparsity import SparsityVector

__all__ = [
    "ChainState",
    "SamplerConfig",
    "ChainStreams",
    "draw_subset",
    "exact_step",
    "async_step",
    "sa_sgld_step",
    "run_chain",
    "Trace",
]


@dataclass
class ChainState:
    delta: SparsityVector
    theta: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        if self.theta.shape != (self.delta.p,):
            raise ValueError("delta and theta must share the dimension p")

    def copy(self):
        return ChainState(self.delta.copy(), self.theta.copy(), self.iteration)


@dataclass(frozen=True)
class SamplerConfig:
    """Algorithm choice plus run-shape knobs.

    init is "null_model" (empty support, zero coefficients) or a
    (theta0, delta0) warm start, e.g. from a lasso fit.
    """

    algorithm: str
    kernel: kernels.KernelConfig
    total_iters: int
    J: int | None = None  # falls back to h.J
    record_every: int = 1
    init: object = "null_model"

    def __post_init__(self):
        if self.algorithm not in ("exact", "async", "sa_sgld"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.total_iters < 0:
            raise ValueError("total_iters must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.J is not None and self.J < 0:
            raise ValueError("J must be nonnegative")

    def validate_for(self, model, h):
        if self.kernel.kind == "exact_gaussian" and model.kind != "linear":
            raise ValueError("the exact Gaussian kernel requires the linear model")
        if self.algorithm == "exact" and self.kernel.kind == "sgld":
            raise ValueError("the exact sampler needs an invariant theta-kernel, not sgld")
        if self.algorithm == "sa_sgld":
            if self.kernel.kind != "sgld":
                raise ValueError("sa_sgld requires the sgld kernel")
            if self._batch_size(model, h) is None:
                raise ValueError("sa_sgld requires a batch size (kernel or hyperparams)")
        J = self.screen_size(h)
        if not 0 <= J <= model.data.p:
            raise ValueError(f"need 0 <= J <= p, got J={J}, p={model.data.p}")
        B = self._batch_size(model, h)
        if B is not None and not 1 <= B <= model.data.n:
            raise ValueError(f"need 1 <= B <= n, got B={B}, n={model.data.n}")

    def screen_size(self, h):
        return h.J if self.J is None else self.J

    def _batch_size(self, model, h):
        return self.kernel.batch_size if self.kernel.batch_size is not None else h.B


@dataclass
class ChainStreams:
    """Named substreams of one chain (refresh / kernel / batch / select / bern)."""

    refresh: np.random.Generator
    kernel: np.random.Generator
    batch: np.random.Generator
    select: np.random.Generator
    bern: np.random.Generator

    @classmethod
    def from_seed(cls, seed, *scope):
        return cls(
            refresh=substream(seed, *scope, "refresh"),
            kernel=substream(seed, *scope, "kernel"),
            batch=substream(seed, *scope, "batch"),
            select=substream(seed, *scope, "select"),
            bern=substream(seed, *scope, "bern"),
        )


def draw_subset(rng, p, size):
    """Uniform ordered sample of `size` distinct indices via partial Fisher-Yates."""
    if not 0 <= size <= p:
        raise ValueError("size must be in [0, p]")
    repl = {}
    out = np.empty(size, dtype=np.int64)
    for i in range(size):
        k = int(rng.integers(i, p))
        out[i] = repl.get(k, k)
        repl[k] = repl.get(i, i)
    return out


def _theta_phase(delta, theta, model, h, cfg, streams):
    """Spike refresh plus one (or inner_steps) kernel move on the active part."""
    theta_bar = kernels.refresh_inactive(theta, delta, h, streams.refresh)
    if delta.count == 0:
        return theta_bar
    u = theta_bar[delta.support]
    k = cfg.kernel
    if k.kind == "exact_gaussian":
        u = kernels.exact_conditional_draw(model.data, delta, h, streams.kernel)
    elif k.kind == "mala":
        for _ in range(k.inner_steps):
            u, _ = kernels.mala_step(model, delta, u, h, k.step, streams.kernel)
    elif k.kind == "sgld":
        B = cfg._batch_size(model, h)
        for _ in range(k.inner_steps):
            u = kernels.sgld_step(
                model, delta, u, h, k.step, B, streams.kernel, streams.batch
            )
    theta_bar[delta.support] = u
    return theta_bar


def gibbs_screen_sweep(delta, theta, selection, model, h, rng):
    """Sequential exact-Gibbs pass over `selection` (in the given order)."""
    d = delta.copy()
    for j in selection:
        q = exact_inclusion_prob(d, theta, int(j), model, h)
        d.set(int(j), 1 if rng.random() < q else 0)
    return d


def independent_screen_probs(delta, theta, selection, model, h, batch=None):
    """Screening probabilities for `selection`, from one (minibatch) gradient.

    Conditions every coordinate on the screening-masked state, so the
    probabilities are valid for an independent, order-free draw.
    """
    sel = np.sort(np.asarray(selection, dtype=np.int64))
    masked = screening_mask(sel, delta)
    if batch is None:
        g = model.grad(theta, masked, sel)
    else:
        g = model.grad_minibatch(theta, masked, batch, sel)
    return sel, approx_inclusion_prob(g, theta[sel], h, delta.p)


def _apply_independent_draws(delta, sel, probs, rng):
    # One uniform per coordinate, aligned to the sorted selection: the
    # outcome cannot depend on any processing schedule.
    us = rng.random(sel.size)
    d = delta.copy()
    for j, q, u in zip(sel, probs, us):
        d.set(int(j), 1 if u < q else 0)
    return d


def exact_step(state, model, h, cfg, streams):
    """One transition of the exact sampler."""
    theta_bar = _theta_phase(state.delta, state.theta, model, h, cfg, streams)
    J = cfg.screen_size(h)
    selection = draw_subset(streams.select, state.delta.p, J)
    delta_bar = gibbs_screen_sweep(state.delta, theta_bar, selection, model, h, streams.bern)
    return ChainState(delta_bar, theta_bar, state.iteration + 1)


def async_step(state, model, h, cfg, streams):
    """One transition of the asynchronous sampler (single full gradient)."""
    theta_bar = _theta_phase(state.delta, state.theta, model, h, cfg, streams)
    J = cfg.screen_size(h)
    selection = draw_subset(streams.select, state.delta.p, J)
    sel, probs = independent_screen_probs(state.delta, theta_bar, selection, model, h)
    delta_bar = _apply_independent_draws(state.delta, sel, probs, streams.bern)
    return ChainState(delta_bar, theta_bar, state.iteration + 1)


def sa_sgld_step(state, model, h, cfg, streams):
    """One transition of sparse asynchronous SGLD.

    The screening probabilities reuse a single minibatch gradient
    estimate, taken at the masked state on a fresh minibatch.
    """
    theta_bar = _theta_phase(state.delta, state.theta, model, h, cfg, streams)
    J = cfg.screen_size(h)
    B = cfg._batch_size(model, h)
    selection = draw_subset(streams.select, state.delta.p, J)
    screen_batch = streams.batch.choice(model.data.n, size=B, replace=False)
    sel, probs = independent_screen_probs(
        state.delta, theta_bar, selection, model, h, batch=screen_batch
    )
    delta_bar = _apply_independent_draws(state.delta, sel, probs, streams.bern)
    return ChainState(delta_bar, theta_bar, state.iteration + 1)


_STEPPERS = {"exact": exact_step, "async": async_step, "sa_sgld": sa_sgld_step}


@dataclass
class Trace:
    """Recorded scalar series (per iteration) plus periodic state snapshots."""

    iterations: np.ndarray
    support_size: np.ndarray
    log_post: np.ndarray
    test_pen_loglik: np.ndarray
    wall_ns: np.ndarray
    snapshots: list = field(default_factory=list)  # (iteration, bits, theta)
    final_state: ChainState | None = None

    def write_series_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("iteration,support_size,log_post,test_pen_loglik,wall_ns\n")
            for k in range(self.iterations.size):
                fh.write(
                    f"{int(self.iterations[k])},{int(self.support_size[k])},"
                    f"{format(self.log_post[k], '.17g')},"
                    f"{format(self.test_pen_loglik[k], '.17g')},"
                    f"{int(self.wall_ns[k])}\n"
                )

    def write_snapshots_csv(self, path):
        if not self.snapshots:
            return
        p = self.snapshots[0][1].size
        with open(path, "w", newline="") as fh:
            cols = [f"d{j}" for j in range(p)] + [f"t{j}" for j in range(p)]
            fh.write("iteration," + ",".join(cols) + "\n")
            for it, bits, theta in self.snapshots:
                vals = [str(int(b)) for b in bits] + [
                    format(v, ".17g") for v in theta
                ]
                fh.write(f"{it}," + ",".join(vals) + "\n")

    def write_snapshots_npz(self, path):
        its = np.array([s[0] for s in self.snapshots], dtype=np.int64)
        bits = np.array([s[1] for s in self.snapshots], dtype=np.uint8)
        thetas = np.array([s[2] for s in self.snapshots])
        np.savez_compressed(path, iterations=its, bits=bits, thetas=thetas)


def initial_state(cfg, p):
    if cfg.init == "null_model":
        return ChainState(SparsityVector.zeros(p), np.zeros(p), 0)
    theta0, delta0 = cfg.init
    theta0 = np.asarray(theta0, dtype=np.float64)
    if not isinstance(delta0, SparsityVector):
        delta0 = SparsityVector(np.asarray(delta0))
    return ChainState(delta0.copy(), theta0.copy(), 0)


def run_chain(cfg, model, h, seed, test_data=None, test_model_kind=None, scope=("chain",)):
    """Drive the configured sampler; returns the Trace.

    Deterministic in (cfg, data, seed) up to the wall_ns timing column.
    A test dataset, when given, adds the penalized test log-likelihood
    series (evaluated at the masked parameter each iteration).
    """
    cfg.validate_for(model, h)
    streams = ChainStreams.from_seed(seed, *scope)
    state = initial_state(cfg, model.data.p)
    step = _STEPPERS[cfg.algorithm]

    if test_data is not None:
        from .experiments import penalized_test_loglik

        kind = test_model_kind or model.kind
        pen = lambda s: penalized_test_loglik(kind, test_data, s.theta, s.delta, h)
    else:
        pen = lambda s: float("nan")

    m = cfg.total_iters + 1
    iters = np.arange(m, dtype=np.int64)
    sizes = np.empty(m, dtype=np.int64)
    lps = np.empty(m)
    pens = np.empty(m)
    walls = np.empty(m, dtype=np.int64)
    snapshots = []

    def record(k, s, wall):
        sizes[k] = s.delta.count
        lps[k] = log_posterior_unnorm(s.delta, s.theta, model, h)
        pens[k] = pen(s)
        walls[k] = wall
        if k % cfg.record_every == 0:
            snapshots.append((s.iteration, s.delta.bits.copy(), s.theta.copy()))

    t0 = time.perf_counter_ns()
    record(0, state, 0)
    for k in range(1, m):
        state = step(state, model, h, cfg, streams)
        record(k, state, time.perf_counter_ns() - t0)
    return Trace(iters, sizes, lps, pens, walls, snapshots, state)
