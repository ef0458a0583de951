"""Heteroscedastic Beta Process: two latent GPs mapped through exp to the
shape parameters of a Beta observation model.

Prediction turns the latent marginals at each test input into a bounded
predictive density, either in closed form (``mode="moment"``, log-normal
means of the shapes) or as an equally weighted mixture of Beta densities
from latent samples (``mode="sample"``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .data import INTERIOR_EPS, interior_power
from .errors import StateError, SupportError, ValidationError
from .kernels import default_kernel
from .likelihoods import LATENT_CLAMP, Beta
from .specfun import log_beta
from .svgp import TrainConfig, init_inducing, latent_marginals, prior_state, train_svgp

MAX_MIXTURE = 10_000
MAX_SAMPLES = 1_000_000
INTERVAL_DRAWS = 2000


@dataclass
class BetaPrediction:
    alpha_star: float
    beta_star: float
    mean: float
    lower95: float
    upper95: float
    mixture: np.ndarray | None = None  # (min(S, MAX_MIXTURE), 2) columns alpha, beta
    mean_alpha: float | None = None  # E[alpha] over the latent posterior (all S draws)
    mean_beta: float | None = None


@dataclass
class HBPModel:
    state: object
    trace: list = field(default_factory=list)
    mode: str = "sample"
    samples: int = 1000
    seed: int = 0
    epsilon: float = INTERIOR_EPS

    name = "hbp"
    space = "original"

    def predict(self, x, mode=None, samples=None, seed=None):
        return hbp_predict(self.state, x, mode or self.mode,
                           self.samples if samples is None else samples,
                           self.seed if seed is None else seed)

    def predict_mean(self, x):
        return np.array([p.mean for p in self.predict(x)])

    def pointwise_log_predictive(self, x, y):
        y = np.asarray(y, dtype=float)
        _check_unit(y)
        yi = interior_power(y, self.epsilon)
        return np.array([hbp_log_density(p, v) for p, v in zip(self.predict(x), yi)])

    def evaluation_targets(self, y):
        return interior_power(y, self.epsilon)


def _check_unit(y):
    bad = ~((y >= 0.0) & (y <= 1.0))
    if np.any(bad):
        raise SupportError("HBP evaluation targets must lie in [0, 1]", np.flatnonzero(bad))


def hbp_fit(x, y, kernels=None, config: TrainConfig | None = None, epsilon=INTERIOR_EPS, **predict_opts):
    """Train the HBP on normalised power ``y`` in [0, 1] (mapped into the open interval)."""
    config = config or TrainConfig()
    y = np.asarray(y, dtype=float)
    _check_unit(y)
    kernels = list(kernels) if kernels is not None else [default_kernel(), default_kernel()]
    if len(kernels) != 2:
        raise ValidationError(f"HBP needs two kernels (alpha, beta), got {len(kernels)}")
    Z = init_inducing(x, config.num_inducing)
    state = prior_state(Z, kernels, Beta(), config.jitter_levels)
    res = train_svgp(state, x, interior_power(y, epsilon), config)
    return HBPModel(res.state, res.trace, epsilon=epsilon, **predict_opts)


def _moment_match(alpha, beta):
    """Shapes of the Beta with the mixture's total mean and total variance."""
    means = alpha / (alpha + beta)
    within = means * (1.0 - means) / (alpha + beta + 1.0)
    mu = float(np.mean(means))
    total_var = float(np.mean(within) + np.var(means))
    nu = mu * (1.0 - mu) / total_var - 1.0
    nu = max(nu, 1e-12)
    return mu * nu, (1.0 - mu) * nu, mu


def hbp_predict(state, x_star, mode="sample", samples=1000, seed=0):
    """Per-point Beta predictive distributions at ``x_star``.

    ``mode="moment"``: alpha* = exp(mu1 + var1 / 2), beta* likewise; the
    95% interval is the exact Beta quantile pair.

    ``mode="sample"``: ``samples`` latent draws per point give a mixture of
    Beta(exp f1, exp f2). alpha*/beta* match the mixture's total mean and
    variance; the mean is the average component mean; the interval is the
    empirical 2.5/97.5% quantiles of 2000 y-draws cycling through the
    components. Each point's random stream is seeded by (seed, index).
    Moments use all ``samples`` draws; only the first ``MAX_MIXTURE`` are
    stored as the mixture.
    """
    if state is None or not isinstance(getattr(state, "likelihood", None), Beta):
        raise StateError("hbp_predict needs a trained state with a Beta likelihood")
    if mode not in ("moment", "sample"):
        raise ValidationError(f"mode must be 'moment' or 'sample', got {mode!r}")
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    mu1, v1 = latent_marginals(state, 0, x_star)
    mu2, v2 = latent_marginals(state, 1, x_star)
    return predict_from_marginals(mu1, v1, mu2, v2, mode, samples, seed)


def predict_from_marginals(mu1, v1, mu2, v2, mode="sample", samples=1000, seed=0):
    """:func:`hbp_predict` given the latent marginals directly."""
    mu1, v1, mu2, v2 = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (mu1, v1, mu2, v2))
    out = []
    if mode == "moment":
        a = np.exp(np.clip(mu1 + 0.5 * v1, -LATENT_CLAMP, LATENT_CLAMP))
        b = np.exp(np.clip(mu2 + 0.5 * v2, -LATENT_CLAMP, LATENT_CLAMP))
        lo = stats.beta.ppf(0.025, a, b)
        hi = stats.beta.ppf(0.975, a, b)
        tiny, top = np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0)
        for i in range(a.size):
            out.append(BetaPrediction(float(a[i]), float(b[i]), float(a[i] / (a[i] + b[i])),
                                      float(np.clip(lo[i], tiny, top)), float(np.clip(hi[i], tiny, top)),
                                      mean_alpha=float(a[i]), mean_beta=float(b[i])))
        return out

    S = int(samples)
    if not 1 <= S <= MAX_SAMPLES:
        raise ValidationError(f"samples must be in [1, {MAX_SAMPLES}], got {S}")
    K = min(S, MAX_MIXTURE)
    reps = -(-INTERVAL_DRAWS // K)
    for i in range(mu1.size):
        rng = np.random.default_rng([int(seed), i])
        f = rng.standard_normal((2, S))
        f1 = np.clip(mu1[i] + np.sqrt(v1[i]) * f[0], -LATENT_CLAMP, LATENT_CLAMP)
        f2 = np.clip(mu2[i] + np.sqrt(v2[i]) * f[1], -LATENT_CLAMP, LATENT_CLAMP)
        a, b = np.exp(f1), np.exp(f2)
        a_star, b_star, mean = _moment_match(a, b)
        a, b = a[:K], b[:K]
        draws = rng.beta(np.tile(a, reps)[:INTERVAL_DRAWS], np.tile(b, reps)[:INTERVAL_DRAWS])
        draws = np.clip(draws, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
        lo, hi = np.quantile(draws, [0.025, 0.975])
        out.append(BetaPrediction(a_star, b_star, mean, float(lo), float(hi), np.column_stack([a, b]),
                                  float(np.mean(np.exp(f1))), float(np.mean(np.exp(f2)))))
    return out


def beta_logpdf(y, a, b):
    return (a - 1.0) * np.log(y) + (b - 1.0) * np.log1p(-y) - log_beta(a, b)


def hbp_log_density(pred: BetaPrediction, y) -> float:
    """log predictive density at ``y``: single Beta, or log of the mixture average."""
    y = float(y)
    if not 0.0 < y < 1.0:
        raise SupportError(f"y={y!r} outside (0, 1)", [0])
    if pred.mixture is None:
        return float(beta_logpdf(y, pred.alpha_star, pred.beta_star))
    comp = beta_logpdf(y, pred.mixture[:, 0], pred.mixture[:, 1])
    return float(logsumexp(comp) - np.log(comp.size))


def predictions_to_arrays(preds):
    """Columns (mean, lower95, upper95, alpha, beta) as arrays."""
    return {
        "mean": np.array([p.mean for p in preds]),
        "lower95": np.array([p.lower95 for p in preds]),
        "upper95": np.array([p.upper95 for p in preds]),
        "alpha": np.array([p.alpha_star for p in preds]),
        "beta": np.array([p.beta_star for p in preds]),
    }
