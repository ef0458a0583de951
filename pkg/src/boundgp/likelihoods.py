"""Observation models: Gaussian, heteroscedastic Gaussian and Beta.

Each likelihood maps ``latent_count`` latent function values to a density
over the observation. The two-latent models integrate the log density
against independent Gaussian marginals with tensor-product Gauss-Hermite
quadrature; the Gaussian model uses its closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import SupportError, ValidationError
from .specfun import digamma, log_beta

LATENT_CLAMP = 30.0
_LOG_2PI = np.log(2.0 * np.pi)


class VarExp(NamedTuple):
    """Expected log density per point with its partial derivatives.

    ``dmu`` and ``dvar`` have shape (latent_count, n); ``dparams`` has shape
    (n_params, n) and holds derivatives w.r.t. the likelihood's own log
    parameters. ``n_clamped`` counts quadrature nodes hitting the clamp.
    """

    value: np.ndarray
    dmu: np.ndarray
    dvar: np.ndarray
    dparams: np.ndarray
    n_clamped: int = 0


def gauss_hermite(H: int):
    """Nodes and weights for E[f(z)], z ~ N(0, 1); weights sum to one."""
    if isinstance(H, bool) or int(H) != H or not (1 <= H <= 100):
        raise ValidationError(f"quadrature points must be an integer in [1, 100], got {H!r}")
    z, w = np.polynomial.hermite_e.hermegauss(int(H))
    return z, w / w.sum()


def _clamp(f):
    c = np.clip(f, -LATENT_CLAMP, LATENT_CLAMP)
    return c, (c == f)


def _check_finite(latents):
    if not np.all(np.isfinite(latents)):
        raise ValidationError("latent values must be finite")


class Likelihood:
    latent_count = 1
    name = "likelihood"

    def log_params(self):
        return np.zeros(0)

    def with_log_params(self, theta):
        return self

    @property
    def n_params(self):
        return self.log_params().size

    def check_support(self, y):
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise SupportError("observations must be finite", np.flatnonzero(~np.isfinite(y)))
        return y

    def log_density(self, y, latents):
        """log p(y | latents); ``latents`` has leading axis of size latent_count."""
        raise NotImplementedError

    def log_density_grad(self, y, latents):
        raise NotImplementedError

    def variational_expectations(self, y, mu, var, H=20) -> VarExp:
        raise NotImplementedError

    def to_dict(self):
        return {"type": self.name}


@dataclass(frozen=True)
class Gaussian(Likelihood):
    noise_variance: float = 0.01

    latent_count = 1
    name = "gaussian"

    def __post_init__(self):
        v = float(self.noise_variance)
        if not (np.isfinite(v) and v > 0):
            raise ValidationError(f"noise_variance must be > 0, got {self.noise_variance!r}")
        object.__setattr__(self, "noise_variance", v)

    def log_params(self):
        return np.log([self.noise_variance])

    def with_log_params(self, theta):
        return Gaussian(float(np.exp(theta[0])))

    def log_density(self, y, latents):
        y = self.check_support(y)
        f = np.asarray(latents, dtype=float)[0]
        _check_finite(f)
        s2 = self.noise_variance
        return -0.5 * (_LOG_2PI + np.log(s2)) - 0.5 * (y - f) ** 2 / s2

    def log_density_grad(self, y, latents):
        f = np.asarray(latents, dtype=float)[0]
        return ((np.asarray(y) - f) / self.noise_variance)[None]

    def variational_expectations(self, y, mu, var, H=20):
        y = self.check_support(y)
        s2 = self.noise_variance
        m, v = mu[0], var[0]
        sq = (y - m) ** 2 + v
        value = -0.5 * (_LOG_2PI + np.log(s2)) - 0.5 * sq / s2
        dmu = ((y - m) / s2)[None]
        dvar = np.full((1, m.size), -0.5 / s2)
        dparams = (-0.5 + 0.5 * sq / s2)[None]
        return VarExp(value, dmu, dvar, dparams)

    def to_dict(self):
        return {"type": self.name, "noise_variance": self.noise_variance}


class _TwoLatent(Likelihood):
    latent_count = 2

    def _grid(self, y, f1, f2):
        """Return (log density, d/df1, d/df2, n_clamped) on broadcast grids."""
        raise NotImplementedError

    def log_density(self, y, latents):
        y = self.check_support(y)
        f = np.asarray(latents, dtype=float)
        _check_finite(f)
        return self._grid(y, f[0], f[1])[0]

    def log_density_grad(self, y, latents):
        y = self.check_support(y)
        f = np.asarray(latents, dtype=float)
        _, d1, d2, _ = self._grid(y, f[0], f[1])
        return np.stack(np.broadcast_arrays(d1, d2))

    def variational_expectations(self, y, mu, var, H=20):
        y = self.check_support(y)
        z, w = gauss_hermite(H)
        s1 = np.sqrt(var[0])[:, None, None]
        s2 = np.sqrt(var[1])[:, None, None]
        za = z[None, :, None]
        zb = z[None, None, :]
        F1 = mu[0][:, None, None] + s1 * za
        F2 = mu[1][:, None, None] + s2 * zb
        ll, d1, d2, nclamp = self._grid(y[:, None, None], F1, F2)
        W = (w[:, None] * w[None, :])[None]
        value = np.sum(W * ll, axis=(1, 2))
        Wd1 = W * d1
        Wd2 = W * d2
        dmu = np.stack([Wd1.sum(axis=(1, 2)), Wd2.sum(axis=(1, 2))])
        dvar = np.stack([
            np.sum(Wd1 * za, axis=(1, 2)) / (2.0 * s1[:, 0, 0]),
            np.sum(Wd2 * zb, axis=(1, 2)) / (2.0 * s2[:, 0, 0]),
        ])
        return VarExp(value, dmu, dvar, np.zeros((0, y.size)), nclamp)


@dataclass(frozen=True)
class HeteroGaussian(_TwoLatent):
    """y ~ N(f1, exp(f2))."""

    name = "hetero"

    def _grid(self, y, f1, f2):
        c2, free = _clamp(f2)
        prec = np.exp(-c2)
        r = y - f1
        ll = -0.5 * _LOG_2PI - 0.5 * c2 - 0.5 * r * r * prec
        d1 = r * prec
        d2 = np.where(free, -0.5 + 0.5 * r * r * prec, 0.0)
        return ll, d1, d2, int(np.count_nonzero(~free))


@dataclass(frozen=True)
class Beta(_TwoLatent):
    """y ~ Beta(exp(f1), exp(f2)) on the open unit interval."""

    name = "beta"

    def check_support(self, y):
        y = np.asarray(y, dtype=float)
        bad = ~((y > 0.0) & (y < 1.0))
        if np.any(bad):
            idx = np.flatnonzero(bad.ravel())
            raise SupportError(f"Beta observations must lie in (0, 1); {idx.size} do not", idx)
        return y

    def _grid(self, y, f1, f2):
        c1, free1 = _clamp(f1)
        c2, free2 = _clamp(f2)
        a = np.exp(c1)
        b = np.exp(c2)
        ly = np.log(y)
        l1y = np.log1p(-y)
        ll = (a - 1.0) * ly + (b - 1.0) * l1y - log_beta(a, b)
        psi_ab = digamma(a + b)
        d1 = np.where(free1, a * (ly - digamma(a) + psi_ab), 0.0)
        d2 = np.where(free2, b * (l1y - digamma(b) + psi_ab), 0.0)
        nclamp = int(np.count_nonzero(~free1) + np.count_nonzero(~free2))
        return ll, d1, d2, nclamp


def likelihood_from_dict(d) -> Likelihood:
    if isinstance(d, str):
        d = {"type": d}
    kind = str(d.get("type", "")).lower()
    if kind == "gaussian":
        return Gaussian(d.get("noise_variance", 0.01))
    if kind in ("hetero", "heterogaussian", "hetero_gaussian"):
        return HeteroGaussian()
    if kind == "beta":
        return Beta()
    raise ValidationError(f"unknown likelihood {kind!r}; expected gaussian, hetero or beta")


def latent_count(lik: Likelihood) -> int:
    return lik.latent_count


def log_density(lik: Likelihood, y, latents):
    """Scalar-friendly wrapper: ``latents`` is a length-latent_count vector."""
    latents = np.asarray(latents, dtype=float)
    if latents.shape[0] != lik.latent_count:
        raise ValidationError(f"{lik.name} expects {lik.latent_count} latents, got {latents.shape[0]}")
    out = lik.log_density(y, latents)
    return float(out) if np.ndim(out) == 0 else out
