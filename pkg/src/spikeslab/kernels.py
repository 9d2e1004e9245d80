"""Inner kernels for the coefficient update on the active coordinates.

Conditionally on delta, the active coordinates u = [theta]_delta follow
the density proportional to exp(-rho1/2 |u|^2 + loglik((u,0)_delta)).
Three kernels target (or approximate) it: an exact conditional Gaussian
draw for the linear model, MaLa, and unadjusted SGLD with a minibatch
gradient.  Inactive coordinates are refreshed independently from the
spike N(0, 1/rho0).
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

__all__ = [
    "KernelConfig",
    "NumericalDegeneracyError",
    "refresh_inactive",
    "conditional_gaussian_moments",
    "exact_conditional_draw",
    "mala_step",
    "sgld_step",
    "embed_active",
]


class NumericalDegeneracyError(RuntimeError):
    """A positive-definite factorization failed (should not happen for rho1 > 0)."""


@dataclass(frozen=True)
class KernelConfig:
    """Which theta-kernel to run and with what knobs.

    kind : "exact_gaussian" (linear model only), "mala" or "sgld"
    step : MaLa step size, or the SGLD step size gamma
    batch_size : SGLD minibatch size
    inner_steps : kernel invocations per outer iteration (default 1)
    """

    kind: str
    step: float = 0.01
    batch_size: int | None = None
    inner_steps: int = 1

    def __post_init__(self):
        if self.kind not in ("exact_gaussian", "mala", "sgld"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind != "exact_gaussian" and not self.step > 0:
            raise ValueError("step must be positive")
        if self.kind == "sgld" and self.step < 0:
            raise ValueError("sgld step must be nonnegative")
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")


def embed_active(u, delta):
    """Lift an active-coordinate vector to R^p (zeros off the support)."""
    theta = np.zeros(delta.p)
    theta[delta.support] = u
    return theta


def refresh_inactive(theta, delta, h, rng):
    """Replace every inactive coordinate by a fresh N(0, 1/rho0) draw."""
    out = np.array(theta, dtype=np.float64, copy=True)
    mask = delta.bits == 0
    out[mask] = rng.standard_normal(int(mask.sum())) / np.sqrt(h.rho0)
    return out


def conditional_gaussian_moments(data, delta, h):
    """Mean and covariance of the active coordinates for the linear model.

    mean = (X'X + rho1*sigma2*I)^-1 X'y over the active columns,
    cov  = sigma2 * (sigma2*rho1*I + X'X)^-1.
    """
    sup = delta.support
    if sup.size == 0:
        raise ValueError("conditional Gaussian needs at least one active coordinate")
    Xs = data.X[:, sup]
    G = Xs.T @ Xs + h.rho1 * data.sigma2 * np.eye(sup.size)
    try:
        cf = cho_factor(G, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rho1>0 makes G PD
        raise NumericalDegeneracyError(str(exc)) from exc
    mean = cho_solve(cf, Xs.T @ data.y)
    cov = data.sigma2 * cho_solve(cf, np.eye(sup.size))
    cov = 0.5 * (cov + cov.T)
    return mean, cov


def exact_conditional_draw(data, delta, h, rng):
    """One exact draw of the active coordinates for the linear model."""
    sup = delta.support
    if sup.size == 0:
        raise ValueError("exact conditional draw needs a nonempty support")
    Xs = data.X[:, sup]
    G = Xs.T @ Xs + h.rho1 * data.sigma2 * np.eye(sup.size)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalDegeneracyError(str(exc)) from exc
    mean = cho_solve((L, True), Xs.T @ data.y)
    z = rng.standard_normal(sup.size)
    # cov = sigma2 * G^-1, so sigma * L^-T z has exactly that covariance.
    return mean + np.sqrt(data.sigma2) * solve_triangular(L, z, lower=True, trans="T")


def _target_logpdf_grad(model, delta, u, h, want_grad=True):
    theta = embed_active(u, delta)
    lp = -0.5 * h.rho1 * float(u @ u) + model.loglik(theta, delta)
    if not want_grad:
        return lp, None
    g = -h.rho1 * u + model.grad(theta, delta, delta.support)
    return lp, g


def mala_step(model, delta, current, h, step, rng):
    """One Metropolis-adjusted Langevin transition on the active coordinates.

    Returns (new_state, accepted).  A proposal with non-finite target
    log-density is rejected outright.
    """
    u = np.asarray(current, dtype=np.float64)
    lp0, g0 = _target_logpdf_grad(model, delta, u, h)
    z = rng.standard_normal(u.size)
    prop = u + step * g0 + np.sqrt(2.0 * step) * z
    lp1, g1 = _target_logpdf_grad(model, delta, prop, h)
    accept_u = rng.random()
    if not np.isfinite(lp1):
        return u.copy(), False
    fwd = prop - u - step * g0
    rev = u - prop - step * g1
    log_alpha = lp1 - lp0 + (float(fwd @ fwd) - float(rev @ rev)) / (4.0 * step)
    if np.log(accept_u) < log_alpha:
        return prop, True
    return u.copy(), False


def sgld_step(model, delta, current, h, gamma, batch_size, rng, batch_rng=None):
    """One unadjusted Langevin step with an n/B-rescaled minibatch gradient.

    The minibatch is drawn fresh (without replacement) inside the step;
    batch selection can use its own stream via `batch_rng`.
    """
    u = np.asarray(current, dtype=np.float64)
    if batch_rng is None:
        batch_rng = rng
    n = model.data.n
    if not 1 <= batch_size <= n:
        raise ValueError("batch_size must be in [1, n]")
    batch = batch_rng.choice(n, size=batch_size, replace=False)
    theta = embed_active(u, delta)
    g = model.grad_minibatch(theta, delta, batch, delta.support)
    drift = gamma * (-h.rho1 * u + g)
    noise = np.sqrt(2.0 * gamma) * rng.standard_normal(u.size)
    return u + drift + noise
