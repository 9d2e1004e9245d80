"""Spike-and-slab posterior arithmetic and the inclusion-probability formulas.

The target density over (delta, theta) is, up to its normalizing constant,

    (p^-u * sqrt(rho1/rho0))^|delta| *
        exp(-rho0/2 * |theta - theta_delta|^2 - rho1/2 * |theta_delta|^2
            + loglik(theta_delta)),

where theta_delta is the component-wise product of theta and delta.  The
three Bernoulli success probabilities used by the samplers' screening
step (exact, gradient-approximate, and minibatch-gradient) live here.
All logs are natural logs.
"""

import math
from dataclasses import dataclass

import numpy as np

from .sparsity import SparsityVector

__all__ = [
    "Hyperparams",
    "penalty_const_a",
    "log_posterior_unnorm",
    "exact_inclusion_prob",
    "approx_inclusion_prob",
    "minibatch_inclusion_prob",
    "screening_mask",
]

# Exponent clamp before exp(); beyond this the probability is 0/1 at
# double precision anyway.
EXP_CLAMP = 700.0


@dataclass(frozen=True)
class Hyperparams:
    """Prior and sampler knobs.

    u : sparsity exponent of the model-size prior, must exceed 1
    rho0 : spike precision (excluded coordinates)
    rho1 : slab precision (included coordinates), 0 < rho1 <= rho0
    J : screening batch size (coordinates updated per iteration)
    B : data minibatch size for SGLD-style updates, optional
    gamma : SGLD step size
    mala_step : MaLa step size
    """

    u: float
    rho0: float
    rho1: float = 1.0
    J: int = 100
    B: int | None = None
    gamma: float = 0.005
    mala_step: float = 0.01

    def __post_init__(self):
        if not self.u > 1:
            raise ValueError("u must be > 1")
        if not (self.rho1 > 0 and self.rho0 >= self.rho1):
            raise ValueError("need rho0 >= rho1 > 0")
        if self.J < 0:
            raise ValueError("J must be nonnegative")
        if self.B is not None and self.B < 1:
            raise ValueError("B must be a positive integer when set")
        if not self.gamma >= 0:
            raise ValueError("gamma must be nonnegative")
        if not self.mala_step > 0:
            raise ValueError("mala_step must be positive")


def _prob_from_exponent(x):
    """(1 + exp(x))^-1 with the exponent clamped to +-EXP_CLAMP."""
    x = np.clip(x, -EXP_CLAMP, EXP_CLAMP)
    return 1.0 / (1.0 + np.exp(x))


def penalty_const_a(h, p):
    """Penalty constant a = u*log(p) + log(rho0/rho1)/2 for dimension p."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return h.u * math.log(p) + 0.5 * math.log(h.rho0 / h.rho1)


def log_posterior_unnorm(delta, theta, model, h):
    """Log posterior density of (delta, theta), up to a global constant.

    A non-finite likelihood value propagates to the returned value.
    """
    a = penalty_const_a(h, delta.p)
    inactive = theta[delta.bits == 0]
    active = theta[delta.support]
    return (
        -delta.count * a
        - 0.5 * h.rho0 * float(inactive @ inactive)
        - 0.5 * h.rho1 * float(active @ active)
        + model.loglik(theta, delta)
    )


def exact_inclusion_prob(delta, theta, j, model, h):
    """Exact Gibbs success probability for coordinate j given (delta, theta).

    Equals (1 + exp(a + (rho1-rho0)/2 * theta_j^2 + loglik(theta masked
    with bit j off) - loglik(theta masked with bit j on)))^-1.  The value
    never depends on the current bit delta_j.
    """
    p = delta.p
    if not 0 <= j < p:
        raise IndexError(f"coordinate {j} out of range for p={p}")
    ll_off = model.loglik(theta, delta.with_bit(j, 0))
    ll_on = model.loglik(theta, delta.with_bit(j, 1))
    expo = (
        penalty_const_a(h, p)
        + 0.5 * (h.rho1 - h.rho0) * float(theta[j]) ** 2
        + ll_off
        - ll_on
    )
    return float(_prob_from_exponent(expo))


def approx_inclusion_prob(grad_j, theta_j, h, p):
    """Gradient-based approximation of the inclusion probability.

    `grad_j` is the j-th partial derivative of the log-likelihood at the
    screening-masked parameter.  The quadratic term enters with reversed
    sign relative to the Taylor expansion, which boosts sensitivity.
    Accepts scalars or aligned arrays.
    """
    a = penalty_const_a(h, p)
    g = np.asarray(grad_j, dtype=np.float64)
    t = np.asarray(theta_j, dtype=np.float64)
    expo = a + 0.5 * (h.rho1 - h.rho0) * t**2 - t * g - 0.5 * t**2 * g**2
    out = _prob_from_exponent(expo)
    return float(out) if out.ndim == 0 else out


def minibatch_inclusion_prob(ghat_j, theta_j, h, p):
    """Minibatch variant: same formula applied to the rescaled estimate.

    `ghat_j` must already carry the n/B rescaling, so with a full batch
    this is identical to :func:`approx_inclusion_prob`.
    """
    return approx_inclusion_prob(ghat_j, theta_j, h, p)


def screening_mask(selection, delta):
    """Zero the selected coordinates of delta (the screening mask).

    The result does not depend on the current bits at the selected
    coordinates, which is what makes the screening Bernoullis mutually
    independent.
    """
    sel = np.asarray(list(selection), dtype=np.int64)
    if sel.size:
        if sel.min() < 0 or sel.max() >= delta.p:
            raise IndexError("selection index out of range")
        if np.unique(sel).size != sel.size:
            raise ValueError("selection contains duplicate indices")
    bits = delta.bits.copy()
    bits[sel] = 0
    return SparsityVector(bits)
