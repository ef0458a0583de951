"""Warped heteroscedastic GP.

Power is pushed through the logit, a two-latent heteroscedastic Gaussian
sparse GP (location f1, log-variance f2) is fitted in the warped space, and
the mean and a +/-2 sd band are mapped back with the inverse logit. There is
no closed-form density in the original space, so evaluation stays in the
warped space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .errors import ValidationError
from .kernels import default_kernel
from .likelihoods import HeteroGaussian
from .svgp import TrainConfig, init_inducing, latent_marginals, prior_state, train_svgp


@dataclass(frozen=True)
class WarpConfig:
    epsilon: float = 1e-4

    def __post_init__(self):
        if not 0.0 < float(self.epsilon) <= 0.01:
            raise ValidationError(f"epsilon must be in (0, 0.01], got {self.epsilon!r}")


def _check_unit(p):
    p = np.asarray(p, dtype=float)
    bad = ~((p >= 0.0) & (p <= 1.0))
    if np.any(bad):
        raise ValidationError(f"warping needs values in [0, 1]; bad indices {np.flatnonzero(bad).tolist()[:20]}")
    return p


def logit_warp(p, cfg: WarpConfig | None = None):
    """ln(p / (1 - p)) after clipping p to [eps, 1 - eps]."""
    eps = (cfg or WarpConfig()).epsilon
    p = np.clip(_check_unit(p), eps, 1.0 - eps)
    return np.log(p) - np.log1p(-p)


def clipped_fraction(p, cfg: WarpConfig | None = None):
    eps = (cfg or WarpConfig()).epsilon
    p = _check_unit(p)
    return float(np.mean((p < eps) | (p > 1.0 - eps))) if p.size else 0.0


def inv_logit(z):
    return expit(np.asarray(z, dtype=float))


def log_warp_jacobian(p, cfg: WarpConfig | None = None):
    """log |d logit / dp| at the clipped p, i.e. -log(p (1 - p))."""
    eps = (cfg or WarpConfig()).epsilon
    p = np.clip(_check_unit(p), eps, 1.0 - eps)
    return -np.log(p) - np.log1p(-p)


class WarpedPrediction(NamedTuple):
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    warped_mean: np.ndarray
    warped_sd: np.ndarray


@dataclass
class WarpedModel:
    state: object
    cfg: WarpConfig = WarpConfig()
    clipped_fraction: float = 0.0
    trace: list = field(default_factory=list)

    name = "warped"
    space = "warped"

    def predict(self, x):
        return warped_predict(self, x)

    def predict_mean(self, x):
        """Warped-space mean, the space this model is scored in."""
        return warped_predict(self, x).warped_mean

    def evaluation_targets(self, y):
        return logit_warp(y, self.cfg)

    def pointwise_log_predictive(self, x, y):
        pred = warped_predict(self, x)
        z = logit_warp(y, self.cfg)
        var = pred.warped_sd**2
        return -0.5 * np.log(2.0 * np.pi * var) - 0.5 * (z - pred.warped_mean) ** 2 / var

    def pointwise_log_predictive_original(self, x, y):
        """Warped-space log density plus the change-of-variables term."""
        return self.pointwise_log_predictive(x, y) + log_warp_jacobian(y, self.cfg)


def warped_fit(x, p, kernels=None, cfg: WarpConfig | None = None, config: TrainConfig | None = None) -> WarpedModel:
    """Fit the heteroscedastic GP to logit-warped power ``p`` in [0, 1]."""
    cfg = cfg or WarpConfig()
    config = config or TrainConfig()
    kernels = list(kernels) if kernels is not None else [default_kernel(), default_kernel()]
    if len(kernels) != 2:
        raise ValidationError(f"warped model needs two kernels (location, log-variance), got {len(kernels)}")
    z = logit_warp(p, cfg)
    Z = init_inducing(x, config.num_inducing)
    state = prior_state(Z, kernels, HeteroGaussian(), config.jitter_levels)
    res = train_svgp(state, x, z, config)
    return WarpedModel(res.state, cfg, clipped_fraction(p, cfg), res.trace)


def band_from_warped(warped_mean, warped_sd):
    mu = np.asarray(warped_mean, dtype=float)
    sd = np.asarray(warped_sd, dtype=float)
    return WarpedPrediction(inv_logit(mu), inv_logit(mu - 2.0 * sd), inv_logit(mu + 2.0 * sd), mu, sd)


def warped_predict(model: WarpedModel, x_star) -> WarpedPrediction:
    """Warped-space mean/sd and the inverse-logit mean with its +/-2 sd band.

    The warped variance is the location latent's variance plus the expected
    noise variance E[exp(f2)] = exp(mu2 + var2 / 2).
    """
    mu1, v1 = latent_marginals(model.state, 0, x_star)
    mu2, v2 = latent_marginals(model.state, 1, x_star)
    sd = np.sqrt(v1 + np.exp(np.minimum(mu2 + 0.5 * v2, 30.0)))
    return band_from_warped(mu1, sd)
