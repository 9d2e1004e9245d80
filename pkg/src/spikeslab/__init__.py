"""Spike-and-slab MCMC with asynchronous screening, couplings, and a desk-scale oracle."""

from .kernels import KernelConfig, NumericalDegeneracyError
from .models import LinearModel, LogisticModel, RegressionData, make_model
from .posterior import (
    Hyperparams,
    approx_inclusion_prob,
    exact_inclusion_prob,
    log_posterior_unnorm,
    minibatch_inclusion_prob,
    penalty_const_a,
    screening_mask,
)
from .samplers import ChainState, SamplerConfig, run_chain
from .sparsity import SparsityVector

__all__ = [
    "ChainState",
    "Hyperparams",
    "KernelConfig",
    "LinearModel",
    "LogisticModel",
    "NumericalDegeneracyError",
    "RegressionData",
    "SamplerConfig",
    "SparsityVector",
    "approx_inclusion_prob",
    "exact_inclusion_prob",
    "log_posterior_unnorm",
    "make_model",
    "minibatch_inclusion_prob",
    "penalty_const_a",
    "run_chain",
    "screening_mask",
]

__version__ = "0.1.0"
