"""Dense GP regression with a Gaussian likelihood.

Used as the reference the sparse engine is checked against. The model itself
has a zero prior mean; :func:`fit_centered` subtracts the training mean first
and :class:`CenteredExactGP` adds it back on prediction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve
from scipy.optimize import minimize

from .errors import ValidationError
from .kernels import Kernel, _as_inputs
from .linalg import JITTER_LEVELS, jitter_cholesky, logdet_from_chol, tri_solve
from .optim import Adam

log = logging.getLogger(__name__)

MAX_DENSE_N = 10_000
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class ExactGPModel:
    kernel: Kernel
    noise_variance: float
    train_x: np.ndarray
    train_y: np.ndarray
    jitter_levels: tuple = JITTER_LEVELS
    converged: bool = True
    history: tuple = ()
    chol: np.ndarray = field(init=False, repr=False)
    jitter: float = field(init=False, repr=False)

    def __post_init__(self):
        x = _as_inputs(self.train_x, "train_x")
        y = np.atleast_1d(np.asarray(self.train_y, dtype=float))
        if y.shape != x.shape:
            raise ValidationError(f"train_x and train_y lengths differ ({x.size} vs {y.size})")
        if not np.all(np.isfinite(y)):
            raise ValidationError("train_y has non-finite entries")
        if not (self.noise_variance >= 0):
            raise ValidationError(f"noise_variance must be non-negative, got {self.noise_variance}")
        object.__setattr__(self, "train_x", x)
        object.__setattr__(self, "train_y", y)
        K = self.kernel.K(x) + self.noise_variance * np.eye(x.size)
        L, jitter = jitter_cholesky(K, self.jitter_levels)
        object.__setattr__(self, "chol", L)
        object.__setattr__(self, "jitter", jitter)

    @property
    def n(self):
        return self.train_x.size

    def with_log_params(self, theta):
        k = self.kernel.n_params
        return replace(self, kernel=self.kernel.with_log_params(theta[:k]),
                       noise_variance=float(np.exp(theta[k])))

    def log_params(self):
        return np.append(self.kernel.log_params(), np.log(self.noise_variance))


def nlml(model: ExactGPModel) -> float:
    """Negative log marginal likelihood -log p(y | x, theta)."""
    L = model.chol
    a = tri_solve(L, model.train_y)
    return float(0.5 * a @ a + 0.5 * logdet_from_chol(L) + 0.5 * model.n * _LOG_2PI)


def nlml_grad(model: ExactGPModel):
    """Gradient of :func:`nlml` with respect to ``model.log_params()``."""
    L = model.chol
    alpha = cho_solve((L, True), model.train_y)
    W = cho_solve((L, True), np.eye(model.n)) - np.outer(alpha, alpha)
    dK = model.kernel.grad_params(model.train_x, model.train_x)
    g_kern = 0.5 * np.einsum("ij,pij->p", W, dK)
    g_noise = 0.5 * model.noise_variance * np.trace(W)
    return np.append(g_kern, g_noise)


def exact_posterior(model: ExactGPModel, test_x, include_noise=False):
    xs = _as_inputs(test_x, "test_x")
    L = model.chol
    Ksx = model.kernel.K(xs, model.train_x)
    alpha = cho_solve((L, True), model.train_y)
    mean = Ksx @ alpha
    V = tri_solve(L, Ksx.T)
    var = model.kernel.Kdiag(xs) - np.sum(V * V, axis=0)
    var = np.maximum(var, 0.0)
    if include_noise:
        var = var + model.noise_variance
    return mean, var


@dataclass
class ExactFitConfig:
    learning_rate: float = 0.05
    iterations: int = 500
    min_log_param: float = np.log(1e-6)
    polish: bool = True


def fit_exact(model: ExactGPModel, config: ExactFitConfig | None = None) -> ExactGPModel:
    """Minimise :func:`nlml` over the log-hyperparameters.

    Adam runs for ``iterations`` steps, then (if ``polish``) L-BFGS-B
    finishes from the best Adam point so the result is a genuine stationary
    point. The best model seen is returned; ``converged`` is False when
    neither stage settled.
    """
    cfg = config or ExactFitConfig()
    if model.n > MAX_DENSE_N:
        raise ValidationError(f"dense fit limited to {MAX_DENSE_N} points, got {model.n}")
    opt = Adam(lr=cfg.learning_rate)
    theta = model.log_params()
    best, best_val = model, nlml(model)
    history = [best_val]
    current = model
    for _ in range(cfg.iterations):
        theta = np.maximum(opt.step(theta, nlml_grad(current)), cfg.min_log_param)
        current = model.with_log_params(theta)
        val = nlml(current)
        history.append(val)
        if val < best_val:
            best, best_val = current, val
    converged = len(history) > 1 and abs(history[-1] - history[-2]) < 1e-6

    if cfg.polish:
        def fun(t):
            try:
                m = model.with_log_params(t)
            except ArithmeticError:
                return np.inf, np.zeros_like(t)
            return nlml(m), nlml_grad(m)

        bounds = [(cfg.min_log_param, None)] * best.log_params().size
        res = minimize(fun, best.log_params(), jac=True, method="L-BFGS-B", bounds=bounds)
        if np.isfinite(res.fun) and res.fun < best_val:
            best, best_val = model.with_log_params(res.x), float(res.fun)
            history.append(best_val)
        converged = converged or bool(res.success)
    if not converged:
        log.warning("fit_exact: no convergence after %d iterations (nlml %.6g)", cfg.iterations, best_val)
    return replace(best, converged=converged, history=tuple(history))


@dataclass(frozen=True)
class CenteredExactGP:
    model: ExactGPModel
    y_mean: float

    def predict(self, x, include_noise=True):
        mean, var = exact_posterior(self.model, x, include_noise)
        return mean + self.y_mean, var


def fit_centered(x, y, kernel: Kernel, noise_variance=0.01, config: ExactFitConfig | None = None):
    y = np.asarray(y, dtype=float)
    y_mean = float(np.mean(y))
    model = fit_exact(ExactGPModel(kernel, noise_variance, x, y - y_mean), config)
    return CenteredExactGP(model, y_mean)
