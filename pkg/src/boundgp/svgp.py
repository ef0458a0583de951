"""Sparse variational GP engine shared by the standard, warped and Beta models.

Each latent function j has its own kernel and a free-form Gaussian
q(u_j) = N(m_j, L_j L_j^T) over its values at the shared inducing inputs Z.
The objective is the usual evidence lower bound: expected log likelihood
under the marginals q(f_j(x_i)) minus the KL from each q(u_j) to its prior.
Gradients are hand-derived adjoints; see ``_objective``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_solve

from .errors import DivergenceError, ValidationError
from .kernels import Kernel, _as_inputs
from .likelihoods import Likelihood
from .linalg import JITTER_LEVELS, jitter_cholesky, logdet_from_chol, tri_solve
from .optim import Adam

log = logging.getLogger(__name__)

VAR_FLOOR = 1e-12
TRACE_EVERY = 100
_CHUNK = 2048


@dataclass(frozen=True)
class LatentGP:
    kernel: Kernel
    m: np.ndarray
    L: np.ndarray

    @property
    def S(self):
        return self.L @ self.L.T


@dataclass(frozen=True)
class VariationalState:
    Z: np.ndarray
    latents: tuple
    likelihood: Likelihood
    jitter_levels: tuple = JITTER_LEVELS

    def __post_init__(self):
        Z = _as_inputs(self.Z, "Z")
        if Z.size > 1 and not np.all(np.diff(Z) > 0):
            raise ValidationError("inducing inputs Z must be strictly increasing")
        latents = tuple(self.latents)
        if len(latents) != self.likelihood.latent_count:
            raise ValidationError(
                f"{self.likelihood.name} likelihood needs {self.likelihood.latent_count} latent GPs, "
                f"got {len(latents)}")
        M = Z.size
        fixed = []
        for j, lat in enumerate(latents):
            m = np.asarray(lat.m, dtype=float).reshape(-1)
            L = np.tril(np.asarray(lat.L, dtype=float))
            if m.shape != (M,) or L.shape != (M, M):
                raise ValidationError(f"latent {j}: m/L shapes {m.shape}/{L.shape} do not match M={M}")
            if not np.all(np.diag(L) > 0):
                raise ValidationError(f"latent {j}: L must have a strictly positive diagonal")
            fixed.append(LatentGP(lat.kernel, m, L))
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "latents", tuple(fixed))

    @property
    def M(self):
        return self.Z.size

    @property
    def J(self):
        return len(self.latents)


@dataclass
class TrainConfig:
    minibatch_size: int = 256
    iterations: int = 2000
    learning_rate: float = 0.01
    quadrature_points: int = 20
    seed: int = 0
    num_inducing: int = 50
    train_inducing: bool = True
    whiten: bool = True
    inducing_lr_scale: float = 0.1
    jitter_levels: tuple = JITTER_LEVELS

    def validate(self, n=None):
        problems = []
        if int(self.minibatch_size) < 1:
            problems.append("minibatch_size must be a positive integer")
        if int(self.iterations) < 0:
            problems.append("iterations must be non-negative")
        if not float(self.learning_rate) > 0:
            problems.append("learning_rate must be positive")
        if not 1 <= int(self.quadrature_points) <= 100:
            problems.append("quadrature_points must be in [1, 100]")
        if not float(self.inducing_lr_scale) >= 0:
            problems.append("inducing_lr_scale must be non-negative")
        if int(self.num_inducing) < 1:
            problems.append("num_inducing must be >= 1")
        if problems:
            raise ValidationError("; ".join(problems))
        return self


class TrainResult(NamedTuple):
    state: VariationalState
    trace: list  # (iteration, full-data elbo) pairs
    final_elbo: float
    n_clamped: int


# ---------------------------------------------------------------- primitives


def kl_gaussian(m_q, L_q, m_p, chol_p) -> float:
    """KL( N(m_q, L_q L_q^T) || N(m_p, chol_p chol_p^T) )."""
    m_q = np.atleast_1d(np.asarray(m_q, dtype=float))
    m_p = np.atleast_1d(np.asarray(m_p, dtype=float))
    L_q = np.atleast_2d(np.asarray(L_q, dtype=float))
    chol_p = np.atleast_2d(np.asarray(chol_p, dtype=float))
    M = m_q.size
    if m_p.size != M or L_q.shape != (M, M) or chol_p.shape != (M, M):
        raise ValidationError(
            f"dimension mismatch: m_q {m_q.shape}, L_q {L_q.shape}, m_p {m_p.shape}, chol_p {chol_p.shape}")
    A = tri_solve(chol_p, L_q)
    d = tri_solve(chol_p, m_q - m_p)
    kl = 0.5 * (np.sum(A * A) + d @ d - M
                + logdet_from_chol(chol_p) - 2.0 * np.sum(np.log(np.abs(np.diag(L_q)))))
    return float(max(kl, 0.0))


def _chol_zz(kernel, Z, levels):
    Kzz = kernel.K(Z)
    Lz, jitter = jitter_cholesky(Kzz, levels)
    return Kzz, Lz, jitter


def latent_marginals(state: VariationalState, j: int, X):
    """Means and variances of q(f_j(x)) at the inputs ``X``."""
    X = _as_inputs(X)
    lat = state.latents[j]
    _, Lz, _ = _chol_zz(lat.kernel, state.Z, state.jitter_levels)
    Kxz = lat.kernel.K(X, state.Z)
    A = cho_solve((Lz, True), Kxz.T).T
    mean = A @ lat.m
    AL = A @ lat.L
    var = lat.kernel.Kdiag(X) - np.sum(A * Kxz, axis=1) + np.sum(AL * AL, axis=1)
    return mean, np.maximum(var, VAR_FLOOR)


def expected_log_lik(lik: Likelihood, y, marginals, H=20):
    """E_q[log p(y | f)] for per-latent marginals ``[(mu, var), ...]``.

    Works elementwise on arrays; returns a float for scalar input.
    """
    if len(marginals) != lik.latent_count:
        raise ValidationError(f"{lik.name} needs {lik.latent_count} marginals, got {len(marginals)}")
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=float))
    mu = np.stack([np.broadcast_to(np.asarray(m, dtype=float), y.shape) for m, _ in marginals])
    var = np.stack([np.broadcast_to(np.asarray(v, dtype=float), y.shape) for _, v in marginals])
    if lik.latent_count > 1 and H < 2:
        raise ValidationError("two-latent likelihoods need at least 2 quadrature points")
    value = lik.variational_expectations(y, mu, np.maximum(var, VAR_FLOOR), H).value
    return float(value[0]) if scalar else value


# ------------------------------------------------------------- the objective


class ElboGrad(NamedTuple):
    """Gradient of the ELBO in the state's natural coordinates."""

    Z: np.ndarray
    m: list
    L: list
    kernel: list  # w.r.t. each kernel's log_params()
    likelihood: np.ndarray  # w.r.t. likelihood.log_params()


def _var_exp_chunked(lik, y, mu, var, H):
    if y.size <= _CHUNK:
        return lik.variational_expectations(y, mu, var, H)
    parts = [lik.variational_expectations(y[i:i + _CHUNK], mu[:, i:i + _CHUNK], var[:, i:i + _CHUNK], H)
             for i in range(0, y.size, _CHUNK)]
    return type(parts[0])(
        np.concatenate([p.value for p in parts]),
        np.concatenate([p.dmu for p in parts], axis=1),
        np.concatenate([p.dvar for p in parts], axis=1),
        np.concatenate([p.dparams for p in parts], axis=1),
        sum(p.n_clamped for p in parts),
    )


def _phi(A):
    out = np.tril(A)
    out[np.diag_indices_from(out)] *= 0.5
    return out


def chol_adjoint(L, L_bar):
    """Gradient w.r.t. K of a function of L = chol(K), given its gradient ``L_bar``."""
    P = _phi(L.T @ np.tril(L_bar))
    return tri_solve(L, tri_solve(L, P.T, trans=True).T, trans=True).T


def _objective(state, X, y, n_total, H, with_grad=True, whitened=False):
    """ELBO on the batch (X, y) scaled to ``n_total`` points, plus adjoints.

    Per latent, with A = Kxz Kzz^-1:
        mu  = A m
        var = kxx - rowsum(A * Kxz) + rowsum((A S) * A)
    and the KL to N(0, Kzz). Gradients w.r.t. (mu, var) from the likelihood
    are pushed back to m, L, Kxz, Kzz and kxx, then through the kernel to
    its log-hyperparameters and the inducing inputs.
    """
    Z = state.Z
    lik = state.likelihood
    scale = n_total / y.size
    cache = []
    mus, vars_, floors = [], [], []
    for lat in state.latents:
        Kzz, Lz, _ = _chol_zz(lat.kernel, Z, state.jitter_levels)
        Kxz = lat.kernel.K(X, Z)
        A = cho_solve((Lz, True), Kxz.T).T
        AL = A @ lat.L
        raw = lat.kernel.Kdiag(X) - np.sum(A * Kxz, axis=1) + np.sum(AL * AL, axis=1)
        floors.append(raw < VAR_FLOOR)
        mus.append(A @ lat.m)
        vars_.append(np.maximum(raw, VAR_FLOOR))
        cache.append((Kzz, Lz, Kxz, A))
    mu = np.stack(mus)
    var = np.stack(vars_)
    ve = _var_exp_chunked(lik, y, mu, var, H)
    value = scale * float(np.sum(ve.value))

    kls = []
    for lat, (Kzz, Lz, _, _) in zip(state.latents, cache):
        kls.append(kl_gaussian(lat.m, lat.L, np.zeros(Z.size), Lz))
    value -= float(np.sum(kls))
    if not with_grad:
        return value, None, ve.n_clamped

    gZ = np.zeros(Z.size)
    gm, gL, gk = [], [], []
    for j, (lat, (Kzz, Lz, Kxz, A)) in enumerate(zip(state.latents, cache)):
        m, L = lat.m, lat.L
        S = L @ L.T
        Kinv = cho_solve((Lz, True), np.eye(Z.size))
        g_mu = scale * ve.dmu[j]
        g_var = np.where(floors[j], 0.0, scale * ve.dvar[j])

        G_A = np.outer(g_mu, m) + g_var[:, None] * (2.0 * A @ S - Kxz)
        G_Kxz = G_A @ Kinv - g_var[:, None] * A
        Kinv_m = Kinv @ m
        G_Kzz = -(A.T @ G_A) @ Kinv
        # KL adjoint: -(1/2)(Kinv - Kinv (S + m m^T) Kinv)
        G_Kzz -= 0.5 * (Kinv - Kinv @ (S + np.outer(m, m)) @ Kinv)

        dm = A.T @ g_mu - Kinv_m
        dL = 2.0 * (A.T * g_var) @ A @ L - Kinv @ L
        dL = np.tril(dL)
        dL[np.diag_indices_from(dL)] += 1.0 / np.diag(L)
        if whitened:
            # m = Lz v, L = Lz Lv: chain to (v, Lv) and add the Lz(Kzz) path
            v = tri_solve(Lz, m)
            Lv = tri_solve(Lz, L)
            G_Kzz = G_Kzz + chol_adjoint(Lz, np.outer(dm, v) + dL @ Lv.T)
            dm = Lz.T @ dm
            dL = np.tril(Lz.T @ dL)
        gm.append(dm)
        gL.append(dL)

        kern = lat.kernel
        dKzz = kern.grad_params(Z, Z)
        dKxz = kern.grad_params(X, Z)
        dkxx = kern.grad_params_diag(X)
        gk.append(np.einsum("ij,pij->p", G_Kzz, dKzz) + np.einsum("ij,pij->p", G_Kxz, dKxz) + dkxx @ g_var)

        Dzz = kern.grad_x2(Z, Z)
        Dxz = kern.grad_x2(X, Z)
        gZ += np.sum((G_Kzz + G_Kzz.T) * Dzz, axis=0) + np.sum(G_Kxz * Dxz, axis=0)

    g_lik = scale * np.sum(ve.dparams, axis=1)
    return value, ElboGrad(gZ, gm, gL, gk, g_lik), ve.n_clamped


def elbo(state: VariationalState, X, y, n_total=None, H=20) -> float:
    """Evidence lower bound on the batch, rescaled by ``n_total / len(y)``."""
    X = _as_inputs(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != X.size or y.size < 1:
        raise ValidationError("batch X and y must be non-empty and equally long")
    return _objective(state, X, y, y.size if n_total is None else n_total, H, with_grad=False)[0]


def elbo_and_grad(state: VariationalState, X, y, n_total=None, H=20):
    X = _as_inputs(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    value, grad, _ = _objective(state, X, y, y.size if n_total is None else n_total, H)
    return value, grad


# ------------------------------------------------------------- construction


def init_inducing(x, M):
    """``M`` evenly spaced quantiles of ``x``, sorted and deduplicated."""
    Z = np.unique(np.quantile(np.asarray(x, dtype=float), np.linspace(0.0, 1.0, int(M))))
    return Z


def prior_state(Z, kernels, likelihood, jitter_levels=JITTER_LEVELS, means=None) -> VariationalState:
    """State with q(u_j) equal to the prior (zero KL), optionally shifted by ``means``."""
    Z = np.asarray(Z, dtype=float)
    latents = []
    for j, k in enumerate(kernels):
        _, Lz, _ = _chol_zz(k, Z, jitter_levels)
        m = np.zeros(Z.size) if means is None else np.full(Z.size, float(means[j]))
        latents.append(LatentGP(k, m, Lz.copy()))
    return VariationalState(Z, tuple(latents), likelihood, jitter_levels)


# ------------------------------------------------------------- flat packing


def _tril_idx(M):
    return np.tril_indices(M)


def pack(state: VariationalState, train_inducing=True, whitened=False):
    """Flatten trainable quantities. L diagonals are stored as logs.

    With ``whitened`` the flat vector holds (v, Lv) with m = Lz v and
    L = Lz Lv, Lz the prior Cholesky factor at Z.
    """
    M = state.M
    r, c = _tril_idx(M)
    parts = [state.Z] if train_inducing else []
    for lat in state.latents:
        m, L = lat.m, lat.L
        if whitened:
            _, Lz, _ = _chol_zz(lat.kernel, state.Z, state.jitter_levels)
            m = tri_solve(Lz, m)
            L = tri_solve(Lz, L)
            L[np.diag_indices(M)] = np.abs(np.diag(L))
        Lp = L.copy()
        Lp[np.diag_indices(M)] = np.log(np.diag(Lp))
        parts += [m, Lp[r, c], lat.kernel.log_params()]
    parts.append(state.likelihood.log_params())
    return np.concatenate(parts)


def unpack(theta, template: VariationalState, train_inducing=True, whitened=False) -> VariationalState:
    M = template.M
    r, c = _tril_idx(M)
    nt = r.size
    i = 0
    if train_inducing:
        Z = np.array(theta[:M])
        i = M
    else:
        Z = template.Z
    latents = []
    for lat in template.latents:
        m = theta[i:i + M].copy()
        i += M
        L = np.zeros((M, M))
        L[r, c] = theta[i:i + nt]
        i += nt
        L[np.diag_indices(M)] = np.exp(np.diag(L))
        k = lat.kernel.n_params
        kern = lat.kernel.with_log_params(theta[i:i + k])
        i += k
        if whitened:
            _, Lz, _ = _chol_zz(kern, Z, template.jitter_levels)
            m = Lz @ m
            L = Lz @ L
        latents.append(LatentGP(kern, m, L))
    lik = template.likelihood.with_log_params(theta[i:])
    return _unchecked_state(Z, latents, lik, template.jitter_levels)


def _unchecked_state(Z, latents, lik, levels):
    # training iterates may momentarily violate Z ordering; skip validation
    s = object.__new__(VariationalState)
    object.__setattr__(s, "Z", Z)
    object.__setattr__(s, "latents", tuple(latents))
    object.__setattr__(s, "likelihood", lik)
    object.__setattr__(s, "jitter_levels", levels)
    return s


def pack_grad(grad: ElboGrad, state: VariationalState, train_inducing=True, whitened=False):
    """Flatten ``grad`` to match :func:`pack`; ``grad`` must come from the same coordinates."""
    M = state.M
    r, c = _tril_idx(M)
    parts = [grad.Z] if train_inducing else []
    for j, lat in enumerate(state.latents):
        L = lat.L
        if whitened:
            _, Lz, _ = _chol_zz(lat.kernel, state.Z, state.jitter_levels)
            L = tri_solve(Lz, L)
        dL = grad.L[j].copy()
        dL[np.diag_indices(M)] *= np.diag(L)
        parts += [grad.m[j], dL[r, c], grad.kernel[j]]
    parts.append(grad.likelihood)
    return np.concatenate(parts)


def sort_inducing(state: VariationalState) -> VariationalState:
    """Reorder Z ascending, permuting each q(u_j) to match."""
    order = np.argsort(state.Z, kind="stable")
    Z = state.Z[order]
    latents = []
    for lat in state.latents:
        S = lat.S[np.ix_(order, order)]
        L, _ = jitter_cholesky(S, (0.0, 1e-12, 1e-10))
        latents.append(LatentGP(lat.kernel, lat.m[order], L))
    return VariationalState(Z, tuple(latents), state.likelihood, state.jitter_levels)


# ------------------------------------------------------------------ training


def full_elbo(state, X, y, H):
    return _objective(state, X, y, y.size, H, with_grad=False)[0]


def train_svgp(state: VariationalState, X, y, config: TrainConfig) -> TrainResult:
    """Stochastic-gradient ascent on the ELBO with Adam.

    The full-data ELBO is recorded every ``TRACE_EVERY`` completed
    iterations (including 0). The returned state is the best one seen at a
    checkpoint or at the end, so the final ELBO is never below the initial.
    """
    config.validate()
    X = _as_inputs(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != X.size or y.size == 0:
        raise ValidationError("training inputs and targets must be non-empty and equally long")
    H = int(config.quadrature_points)
    if state.likelihood.latent_count > 1 and H < 2:
        raise ValidationError("two-latent likelihoods need at least 2 quadrature points")
    N = y.size
    B = min(int(config.minibatch_size), N)
    rng = np.random.default_rng(config.seed)
    ti = bool(config.train_inducing)
    wh = bool(config.whiten)

    theta = pack(state, ti, wh)
    lr = np.full(theta.size, float(config.learning_rate))
    if ti:
        lr[:state.M] *= float(config.inducing_lr_scale)
    opt = Adam(lr=lr)
    current = state
    trace = []
    best_state, best_val = state, -np.inf
    n_clamped = 0

    def checkpoint(it, s, record):
        nonlocal best_state, best_val
        val = full_elbo(s, X, y, H)
        if not np.isfinite(val):
            raise DivergenceError(f"full-data ELBO became non-finite at iteration {it}", trace)
        if record:
            trace.append((it, val))
        if val > best_val:
            best_state, best_val = s, val
        return val

    perm = rng.permutation(N)
    pos = 0
    for it in range(int(config.iterations)):
        if it % TRACE_EVERY == 0:
            checkpoint(it, current, True)
        if pos + B > N:
            perm = rng.permutation(N)
            pos = 0
        idx = perm[pos:pos + B]
        pos += B
        try:
            value, grad, nc = _objective(current, X[idx], y[idx], N, H, whitened=wh)
        except ArithmeticError as exc:
            raise DivergenceError(f"numerical failure at iteration {it}: {exc}", trace) from exc
        n_clamped += nc
        g = pack_grad(grad, current, ti, wh)
        if not (np.isfinite(value) and np.all(np.isfinite(g))):
            raise DivergenceError(f"ELBO or gradient non-finite at iteration {it}", trace)
        theta = opt.step(theta, -g)
        try:
            current = unpack(theta, state, ti, wh)
        except ArithmeticError as exc:
            raise DivergenceError(f"numerical failure at iteration {it}: {exc}", trace) from exc

    n_done = int(config.iterations)
    checkpoint(n_done, current, n_done % TRACE_EVERY == 0)
    if n_clamped:
        log.warning("latent clamp to +/-%g triggered at %d quadrature nodes during training",
                    30.0, n_clamped)
    final = sort_inducing(best_state) if best_state is not state else state
    return TrainResult(final, trace, float(best_val), n_clamped)
