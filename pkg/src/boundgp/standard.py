"""Homoscedastic sparse GP: the Gaussian-likelihood baseline model.

Targets are centred on their training mean before fitting; the mean is
added back on prediction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import default_kernel
from .likelihoods import Gaussian
from .svgp import TrainConfig, init_inducing, latent_marginals, prior_state, train_svgp

_Z95 = 1.959963984540054


@dataclass
class StandardModel:
    state: object
    y_mean: float = 0.0
    trace: list = field(default_factory=list)

    name = "standard"
    space = "original"

    def predict(self, x, include_noise=True):
        mu, var = latent_marginals(self.state, 0, x)
        if include_noise:
            var = var + self.state.likelihood.noise_variance
        return mu + self.y_mean, var

    def predict_mean(self, x):
        return self.predict(x)[0]

    def predict_band(self, x):
        """(mean, lower95, upper95); the band is Gaussian and may leave [0, 1]."""
        mu, var = self.predict(x)
        sd = np.sqrt(var)
        return mu, mu - _Z95 * sd, mu + _Z95 * sd

    def pointwise_log_predictive(self, x, y):
        mu, var = self.predict(x)
        y = np.asarray(y, dtype=float)
        return -0.5 * np.log(2.0 * np.pi * var) - 0.5 * (y - mu) ** 2 / var

    def evaluation_targets(self, y):
        return np.asarray(y, dtype=float)


def fit_standard(x, y, kernel=None, config: TrainConfig | None = None, noise_variance=0.01) -> StandardModel:
    config = config or TrainConfig()
    y = np.asarray(y, dtype=float)
    y_mean = float(np.mean(y))
    Z = init_inducing(x, config.num_inducing)
    state = prior_state(Z, [kernel or default_kernel()], Gaussian(noise_variance), config.jitter_levels)
    res = train_svgp(state, x, y - y_mean, config)
    return StandardModel(res.state, y_mean, res.trace)
