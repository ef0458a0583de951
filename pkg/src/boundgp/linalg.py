import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import NumericalError

JITTER_LEVELS = (0.0, 1e-10, 1e-8, 1e-6)


def jitter_cholesky(K, levels=JITTER_LEVELS):
    """Lower Cholesky factor of ``K``, escalating diagonal jitter on failure.

    Jitter is relative to the mean diagonal. Returns ``(L, jitter)`` where
    ``jitter`` is the absolute amount added.
    """
    scale = float(np.mean(np.diag(K)))
    if not np.isfinite(scale) or scale <= 0:
        scale = 1.0
    tried = []
    n = K.shape[0]
    for level in levels:
        jitter = level * scale
        tried.append(jitter)
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(n) if jitter else K)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return L, jitter
    raise NumericalError(f"matrix of size {n} not positive definite after jitter escalation", tried)


def chol_inverse(L):
    return cho_solve((L, True), np.eye(L.shape[0]))


def logdet_from_chol(L):
    return 2.0 * np.sum(np.log(np.diag(L)))


def tri_solve(L, b, trans=False):
    return solve_triangular(L, b, lower=True, trans="T" if trans else "N")
