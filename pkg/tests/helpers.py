"""Numerical checks shared by the unit and acceptance tests."""

import math

import numpy as np
from scipy import integrate, stats

from boundgp.hbp import hbp_log_density
from boundgp.kernels import Linear, Matern32, Sum
from boundgp.likelihoods import Beta
from boundgp.svgp import LatentGP, VariationalState, elbo, elbo_and_grad, pack, pack_grad, unpack


def predictive_mass(pred, cut=1e-8):
    """Numerical mass of a prediction's density over (0, 1).

    The interior [cut, 1 - cut] is integrated with adaptive quadrature in
    log y and log(1 - y) (shapes below one put poles at the ends); the two
    thin end slabs come from each component's exact CDF.
    """
    def lower(s):
        y = math.exp(s)
        return math.exp(hbp_log_density(pred, y)) * y

    def upper(s):
        y = -math.expm1(s)
        return math.exp(hbp_log_density(pred, y)) * (1 - y)

    a = math.log(cut)
    m1, _ = integrate.quad(lower, a, math.log(0.5), limit=500, epsabs=1e-12, epsrel=1e-11)
    m2, _ = integrate.quad(upper, a, math.log(0.5), limit=500, epsabs=1e-12, epsrel=1e-11)
    comps = pred.mixture if pred.mixture is not None else np.array([[pred.alpha_star, pred.beta_star]])
    tails = stats.beta.cdf(cut, comps[:, 0], comps[:, 1]) + stats.beta.sf(1 - cut, comps[:, 0], comps[:, 1])
    return m1 + m2 + float(np.mean(tails))


def random_chol(rng, M, scale=0.5):
    L = np.tril(rng.normal(size=(M, M)) * scale)
    L[np.diag_indices(M)] = np.abs(np.diag(L)) + 0.1
    return L


def gradient_problem(lik, seed=1, N=20, M=5):
    rng = np.random.default_rng(seed)
    X = np.sort(rng.uniform(0, 1, N))
    Z = np.sort(rng.uniform(0, 1, M))
    if isinstance(lik, Beta):
        y = rng.uniform(0.05, 0.95, N)
    else:
        y = np.sin(5 * X) + 0.1 * rng.normal(size=N)
    lats = [LatentGP(Sum.of(Matern32(1.2, 0.3), Linear(0.4)), 0.5 * rng.normal(size=M), random_chol(rng, M, 0.3))
            for _ in range(lik.latent_count)]
    return VariationalState(Z, tuple(lats), lik), X, y


def gradient_errors(lik, whitened=False, H=10, n_total=50, h=1e-5):
    """Relative errors between analytic and central-difference ELBO gradients.

    Covers every trainable scalar: Z, each m_j and L_j entry (diagonal in
    log space), kernel and likelihood log-hyperparameters.
    """
    s, X, y = gradient_problem(lik)
    th = pack(s, whitened=whitened)
    if whitened:
        from boundgp.svgp import _objective

        _, g, _ = _objective(s, X, y, n_total, H, whitened=True)
    else:
        _, g = elbo_and_grad(s, X, y, n_total=n_total, H=H)
    ga = pack_grad(g, s, whitened=whitened)
    fd = np.empty_like(th)
    for i in range(th.size):
        e = np.zeros_like(th)
        e[i] = h
        fd[i] = (elbo(unpack(th + e, s, whitened=whitened), X, y, n_total, H)
                 - elbo(unpack(th - e, s, whitened=whitened), X, y, n_total, H)) / (2 * h)
    return np.abs(fd - ga) / np.maximum(np.abs(ga), 1e-3), th.size
