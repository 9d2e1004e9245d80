"""Couplings of the exact sampler with itself and mixing-time bounds.

Two copies of the exact chain are evolved jointly so that each copy,
viewed alone, is an ordinary chain, while shared randomness makes them
coalesce.  Per step:

  * coefficient phase - coordinates are partitioned by the pair of
    inclusion bits.  Both-inactive coordinates share one standard
    normal; the three remaining blocks (active in one chain, in the
    other, or in both) are drawn from Gaussian maximal couplings of the
    corresponding block laws (spike block vs conditional-Gaussian block,
    or conditional vs conditional), which return bit-identical values on
    a coupling success;
  * screening phase - one shared selection of J coordinates and one
    shared uniform per coordinate drive both chains' sequential Gibbs
    updates, the Bernoulli maximal coupling.

Once the two states coincide they evolve identically forever (the
coupling is faithful).  Running a lag-L pair until it meets yields the
meeting time tau, and averaging max(0, ceil((tau - L - t)/L)) over
replicas bounds the total-variation distance to stationarity at time t
from above; the mixing time estimate is where that curve crosses a
threshold.  Only the linear-model exact sampler is supported, since the
construction needs the closed-form conditional Gaussian.
"""

import math
from dataclasses import dataclass

import numpy as np

from .kernels import conditional_gaussian_moments
from .posterior import exact_inclusion_prob
from .rngtools import substream
from .samplers import ChainState, ChainStreams, draw_subset, exact_step, initial_state
from .sparsity import SparsityVector

__all__ = [
    "CoupledTrace",
    "MixingCurve",
    "bernoulli_maximal_coupling",
    "gaussian_maximal_coupling",
    "coupled_exact_step",
    "run_coupled_pair",
    "bound_from_taus",
    "estimate_mixing_bound",
]


def bernoulli_maximal_coupling(p1, p2, rng):
    """Pair of bits with Ber(p1), Ber(p2) marginals from one shared uniform.

    The draws disagree exactly when the uniform lands between p1 and p2,
    so the disagreement probability is |p1 - p2|: the maximal coupling.
    """
    u = rng.random()
    return int(u < p1), int(u < p2)


class _GaussianDensity:
    """Mean/covariance with a cached Cholesky factor for logpdf and sampling."""

    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
        if cov.shape != (self.mean.size, self.mean.size):
            raise ValueError("mean and covariance dimensions disagree")
        try:
            self.chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance must be symmetric positive definite") from exc
        self._logdet = 2.0 * float(np.sum(np.log(np.diag(self.chol))))
        self._const = -0.5 * (self.mean.size * math.log(2.0 * math.pi) + self._logdet)

    def sample(self, rng):
        z = rng.standard_normal(self.mean.size)
        return self.mean + self.chol @ z

    def logpdf(self, x):
        w = np.linalg.solve(self.chol, x - self.mean)
        return self._const - 0.5 * float(w @ w)


def gaussian_maximal_coupling(mean1, cov1, mean2, cov2, rng, max_tries=1_000_000):
    """Draw (X, Y) with the two Gaussian marginals, meeting maximally often.

    Rejection construction: propose X from the first density and accept
    it as the common value with probability min(1, f2(X)/f1(X)); on
    rejection, resample Y from the second density until it lands in the
    complementary region.  P(X == Y) equals the total density overlap,
    and on success the returned arrays are bit-identical.
    """
    f1 = _GaussianDensity(mean1, cov1)
    f2 = _GaussianDensity(mean2, cov2)
    if f1.mean.size != f2.mean.size:
        raise ValueError("the two marginals must share a dimension")
    x = f1.sample(rng)
    if math.log(rng.random()) <= f2.logpdf(x) - f1.logpdf(x):
        return x, x.copy()
    for _ in range(max_tries):
        y = f2.sample(rng)
        if math.log(rng.random()) > f1.logpdf(y) - f2.logpdf(y):
            return x, y
    raise RuntimeError("gaussian_maximal_coupling failed to terminate")


def _coordinatewise_maximal(mean1, cov1, mean2, cov2, rng):
    d = np.atleast_1d(mean1).size
    v1 = np.sqrt(np.diag(np.atleast_2d(cov1)))
    v2 = np.sqrt(np.diag(np.atleast_2d(cov2)))
    x = np.empty(d)
    y = np.empty(d)
    m1 = np.atleast_1d(mean1)
    m2 = np.atleast_1d(mean2)
    for k in range(d):
        xk, yk = gaussian_maximal_coupling(
            m1[k : k + 1], [[v1[k] ** 2]], m2[k : k + 1], [[v2[k] ** 2]], rng
        )
        x[k], y[k] = xk[0], yk[0]
    return x, y


def _block(mean, cov, support, block):
    """Marginal of a conditional Gaussian restricted to `block` coordinates."""
    pos = np.searchsorted(support, block)
    return mean[pos], cov[np.ix_(pos, pos)]


def coupled_exact_step(state1, state2, model, h, cfg, streams, block_mode="joint"):
    """One joint transition of two exact chains; returns (state1', state2', met).

    Both marginals move exactly like the uncoupled exact sampler.  met
    is True when the updated states coincide bitwise; from then on the
    shared randomness keeps them identical.
    """
    if model.kind != "linear":
        raise ValueError("the coupled exact kernel requires the linear model")
    if cfg.kernel.kind != "exact_gaussian":
        raise ValueError("the coupled exact kernel requires the exact Gaussian kernel")
    d1, d2 = state1.delta, state2.delta
    p = d1.p
    rng = streams.kernel
    couple = gaussian_maximal_coupling if block_mode == "joint" else _coordinatewise_maximal

    b1 = d1.bits.astype(bool)
    b2 = d2.bits.astype(bool)
    g00 = np.flatnonzero(~b1 & ~b2)
    g11 = np.flatnonzero(b1 & b2)
    g10 = np.flatnonzero(b1 & ~b2)
    g01 = np.flatnonzero(~b1 & b2)

    th1 = np.empty(p)
    th2 = np.empty(p)
    spike_sd = 1.0 / math.sqrt(h.rho0)
    shared = spike_sd * rng.standard_normal(g00.size)
    th1[g00] = shared
    th2[g00] = shared

    m1 = c1 = m2 = c2 = None
    if d1.count:
        m1, c1 = conditional_gaussian_moments(model.data, d1, h)
    if d2.count:
        m2, c2 = conditional_gaussian_moments(model.data, d2, h)

    if g11.size:
        mu1, cv1 = _block(m1, c1, d1.support, g11)
        mu2, cv2 = _block(m2, c2, d2.support, g11)
        x, y = couple(mu1, cv1, mu2, cv2, rng)
        th1[g11] = x
        th2[g11] = y
    if g10.size:
        mu1, cv1 = _block(m1, c1, d1.support, g10)
        spike = spike_sd**2 * np.eye(g10.size)
        x, y = couple(mu1, cv1, np.zeros(g10.size), spike, rng)
        th1[g10] = x
        th2[g10] = y
    if g01.size:
        mu2, cv2 = _block(m2, c2, d2.support, g01)
        spike = spike_sd**2 * np.eye(g01.size)
        x, y = couple(np.zeros(g01.size), spike, mu2, cv2, rng)
        th1[g01] = x
        th2[g01] = y

    J = cfg.screen_size(h)
    selection = draw_subset(streams.select, p, J)
    e1 = d1.copy()
    e2 = d2.copy()
    for j in selection:
        j = int(j)
        u = streams.bern.random()
        q1 = exact_inclusion_prob(e1, th1, j, model, h)
        q2 = exact_inclusion_prob(e2, th2, j, model, h)
        e1.set(j, 1 if u < q1 else 0)
        e2.set(j, 1 if u < q2 else 0)

    out1 = ChainState(e1, th1, state1.iteration + 1)
    out2 = ChainState(e2, th2, state2.iteration + 1)
    met = np.array_equal(e1.bits, e2.bits) and np.array_equal(th1, th2)
    return out1, out2, met


@dataclass
class CoupledTrace:
    """Outcome of one lag-L coupled pair."""

    lag: int
    meeting_time: int | None  # tau, on the leading chain's clock
    max_iters: int

    def __post_init__(self):
        if self.meeting_time is not None and self.meeting_time <= self.lag:
            raise ValueError("meeting time must exceed the lag")

    @property
    def censored(self):
        return self.meeting_time is None

    @property
    def tau_for_bound(self):
        # Censored pairs enter the bound at the horizon, flagged upstream.
        return self.max_iters if self.censored else self.meeting_time


def run_coupled_pair(model, h, cfg, lag, max_iters, seed, scope=("coupled",), block_mode="joint"):
    """Evolve one lag-L pair until it meets (or the horizon is hit)."""
    if lag < 1:
        raise ValueError("lag must be >= 1")
    lead_streams = ChainStreams.from_seed(seed, *scope, "lead")
    pair_streams = ChainStreams.from_seed(seed, *scope, "pair")
    x = initial_state(cfg, model.data.p)
    y = initial_state(cfg, model.data.p)
    for _ in range(lag):
        x = exact_step(x, model, h, cfg, lead_streams)
    for m in range(1, max_iters + 1):
        x, y, met = coupled_exact_step(x, y, model, h, cfg, pair_streams, block_mode)
        if met:
            return CoupledTrace(lag, lag + m, max_iters)
    return CoupledTrace(lag, None, max_iters)


def bound_from_taus(taus, lag, t_grid):
    """Monte Carlo TV bound per grid time plus its standard error."""
    taus = np.asarray(taus, dtype=np.float64)
    t_grid = np.asarray(t_grid, dtype=np.float64)
    contrib = np.maximum(
        0.0, np.ceil((taus[None, :] - lag - t_grid[:, None]) / lag)
    )
    bound = contrib.mean(axis=1)
    stderr = contrib.std(axis=1, ddof=1) / math.sqrt(taus.size) if taus.size > 1 else np.zeros_like(bound)
    return bound, stderr


@dataclass
class MixingCurve:
    """Estimated TV upper bound on a time grid, with replication error bars."""

    t_grid: np.ndarray
    bound: np.ndarray
    stderr: np.ndarray
    replications: int
    censored: int = 0

    @property
    def low_confidence(self):
        return self.censored > 0

    def t_mix(self, eps=0.25):
        hit = np.flatnonzero(self.bound <= eps)
        if hit.size == 0:
            return None
        return int(self.t_grid[hit[0]])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("t,bound,stderr\n")
            for t, b, s in zip(self.t_grid, self.bound, self.stderr):
                fh.write(f"{int(t)},{format(b, '.17g')},{format(s, '.17g')}\n")


def estimate_mixing_bound(model, h, cfg, lag, replications, seed, t_grid=None,
                          max_iters=20_000, scope=("mix",), block_mode="joint"):
    """Run R independent lag-L pairs and assemble the bound curve.

    Returns (MixingCurve, list of CoupledTrace).  Censored pairs make
    the curve low-confidence (their tau is truncated at the horizon).
    """
    if replications < 1:
        raise ValueError("need at least one replication")
    traces = [
        run_coupled_pair(model, h, cfg, lag, max_iters, seed,
                         scope=(*scope, "replica", r), block_mode=block_mode)
        for r in range(replications)
    ]
    taus = np.array([tr.tau_for_bound for tr in traces], dtype=np.float64)
    if t_grid is None:
        t_grid = np.arange(0, int(taus.max()) - lag + 2)
    bound, stderr = bound_from_taus(taus, lag, t_grid)
    curve = MixingCurve(
        np.asarray(t_grid), bound, stderr, replications,
        censored=sum(tr.censored for tr in traces),
    )
    return curve, traces


def write_replica_csv(path, traces, seeds=None):
    """One row per replica: replica_id, seed, lag, tau, censored."""
    with open(path, "w", newline="") as fh:
        fh.write("replica_id,seed,lag,tau,censored\n")
        for r, tr in enumerate(traces):
            seed = seeds[r] if seeds is not None else ""
            tau = "" if tr.censored else int(tr.meeting_time)
            fh.write(f"{r},{seed},{tr.lag},{tau},{int(tr.censored)}\n")
