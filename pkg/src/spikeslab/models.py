"""Likelihood models: Gaussian linear regression and logistic regression.

Both models evaluate the log-likelihood at the masked parameter
theta_delta by touching only the active columns of the design, so a
call costs O(n * |delta|) rather than O(n * p).  Gradients are returned
for a caller-chosen coordinate set, with the residual (or fitted
probabilities) computed once and reused across coordinates.  Minibatch
gradients are prescaled by n/B so the full batch reproduces the exact
gradient.
"""

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

__all__ = [
    "RegressionData",
    "LinearModel",
    "LogisticModel",
    "make_model",
    "minibatch_grad",
]


@dataclass
class RegressionData:
    """Design matrix, response, and (for the linear model) noise variance."""

    X: np.ndarray
    y: np.ndarray
    sigma2: float = 1.0

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        if self.X.ndim != 2:
            raise ValueError("X must be a 2-d array")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("y must have one entry per row of X")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


@dataclass
class OpCounter:
    """Instrumentation: call counts and touched-cell totals per model."""

    loglik_calls: int = 0
    grad_calls: int = 0
    minibatch_grad_calls: int = 0
    cells: int = 0

    def reset(self):
        self.loglik_calls = 0
        self.grad_calls = 0
        self.minibatch_grad_calls = 0
        self.cells = 0


class _BaseModel:
    kind = "base"

    def __init__(self, data):
        self.data = data
        self.ops = OpCounter()
        self._cols = OrderedDict()  # support key -> active-column copy

    # Active columns are copied once per support-change epoch; kernels
    # evaluate the same support many times in a row, so this usually hits.
    def _active_cols(self, delta):
        key = delta.key()
        cached = self._cols.get(key)
        if cached is not None:
            self._cols.move_to_end(key)
            return cached
        cols = np.ascontiguousarray(self.data.X[:, delta.support])
        self._cols[key] = cols
        if len(self._cols) > 4:
            self._cols.popitem(last=False)
        return cols

    def _linear_predictor(self, theta, delta):
        if delta.count == 0:
            return np.zeros(self.data.n)
        self.ops.cells += self.data.n * delta.count
        return self._active_cols(delta) @ theta[delta.support]

    def loglik(self, theta, delta):
        raise NotImplementedError

    def grad(self, theta, delta, coords):
        raise NotImplementedError

    def grad_minibatch(self, theta, delta, batch, coords):
        raise NotImplementedError

    def _batch_rows(self, batch):
        rows = np.sort(np.asarray(batch, dtype=np.int64))
        if rows.size == 0:
            raise ValueError("batch must be nonempty")
        if rows[0] < 0 or rows[-1] >= self.data.n:
            raise IndexError("batch index out of range")
        return rows


class LinearModel(_BaseModel):
    """Gaussian log-likelihood -|y - X theta_delta|^2 / (2 sigma2)."""

    kind = "linear"

    def loglik(self, theta, delta):
        self.ops.loglik_calls += 1
        r = self.data.y - self._linear_predictor(theta, delta)
        return -0.5 * float(r @ r) / self.data.sigma2

    def grad(self, theta, delta, coords):
        """Components <X_j, y - X theta_delta> / sigma2 for j in coords."""
        self.ops.grad_calls += 1
        coords = np.asarray(coords, dtype=np.int64)
        r = self.data.y - self._linear_predictor(theta, delta)
        self.ops.cells += self.data.n * coords.size
        return (self.data.X[:, coords].T @ r) / self.data.sigma2

    def grad_minibatch(self, theta, delta, batch, coords):
        self.ops.minibatch_grad_calls += 1
        coords = np.asarray(coords, dtype=np.int64)
        rows = self._batch_rows(batch)
        Xb = self.data.X[rows]
        sup = delta.support
        fit = Xb[:, sup] @ theta[sup] if sup.size else np.zeros(rows.size)
        rb = self.data.y[rows] - fit
        self.ops.cells += rows.size * (sup.size + coords.size)
        scale = self.data.n / rows.size
        return scale * (Xb[:, coords].T @ rb) / self.data.sigma2


class LogisticModel(_BaseModel):
    """Bernoulli log-likelihood with the logistic link.

    Log-terms are evaluated as logaddexp(0, margin), which stays finite
    for |margin| beyond the exp() overflow point (~36 and up).
    """

    kind = "logistic"

    def __init__(self, data):
        super().__init__(data)
        y = data.y
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("logistic model needs a 0/1 response")

    def loglik(self, theta, delta):
        self.ops.loglik_calls += 1
        m = self._linear_predictor(theta, delta)
        return float(self.data.y @ m - np.logaddexp(0.0, m).sum())

    def grad(self, theta, delta, coords):
        """Components <X_j, y - sigmoid(X theta_delta)> for j in coords."""
        self.ops.grad_calls += 1
        coords = np.asarray(coords, dtype=np.int64)
        m = self._linear_predictor(theta, delta)
        self.ops.cells += self.data.n * coords.size
        return self.data.X[:, coords].T @ (self.data.y - expit(m))

    def grad_minibatch(self, theta, delta, batch, coords):
        self.ops.minibatch_grad_calls += 1
        coords = np.asarray(coords, dtype=np.int64)
        rows = self._batch_rows(batch)
        Xb = self.data.X[rows]
        sup = delta.support
        m = Xb[:, sup] @ theta[sup] if sup.size else np.zeros(rows.size)
        self.ops.cells += rows.size * (sup.size + coords.size)
        scale = self.data.n / rows.size
        return scale * (Xb[:, coords].T @ (self.data.y[rows] - expit(m)))


def make_model(kind, data):
    if kind == "linear":
        return LinearModel(data)
    if kind == "logistic":
        return LogisticModel(data)
    raise ValueError(f"unknown model kind {kind!r}")


def minibatch_grad(model, data, theta, delta, batch, coords):
    """Module-level wrapper around model.grad_minibatch."""
    if data is not model.data:
        raise ValueError("data does not belong to this model")
    return model.grad_minibatch(theta, delta, batch, coords)
