"""Covariance functions on scalar inputs.

Every kernel is an immutable dataclass. Hyperparameters are exposed in log
space (``log_params`` / ``with_log_params``) because that is how training
moves them, and every kernel supplies the derivative pieces the variational
engine chains through: d K / d log-theta and d k(x, x') / d x'.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

_SQRT3 = np.sqrt(3.0)


def _as_inputs(X, name="X"):
    X = np.atleast_1d(np.asarray(X, dtype=float))
    if X.ndim != 1:
        raise ValidationError(f"{name} must be a vector of scalar wind speeds, got shape {X.shape}")
    if X.size == 0:
        raise ValidationError(f"{name} is empty")
    if not np.all(np.isfinite(X)):
        bad = np.flatnonzero(~np.isfinite(X))
        raise ValidationError(f"{name} has non-finite entries at {bad.tolist()}")
    return X


def _positive(name, value):
    value = float(value)
    if not (np.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be strictly positive, got {value!r}")
    return value


class Kernel:
    """Common interface; concrete kernels below."""

    def K(self, X, X2=None):
        X = _as_inputs(X)
        X2 = X if X2 is None else _as_inputs(X2, "X2")
        return self._K(X, X2)

    def Kdiag(self, X):
        return self._Kdiag(_as_inputs(X))

    @property
    def n_params(self) -> int:
        return len(self.log_params())

    def __add__(self, other):
        return Sum.of(self, other)


@dataclass(frozen=True)
class _Stationary(Kernel):
    variance: float = 1.0
    lengthscale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "variance", _positive("variance", self.variance))
        object.__setattr__(self, "lengthscale", _positive("lengthscale", self.lengthscale))

    def log_params(self):
        return np.log([self.variance, self.lengthscale])

    def with_log_params(self, theta):
        v, l = np.exp(np.asarray(theta, dtype=float))
        return type(self)(variance=v, lengthscale=l)

    def _Kdiag(self, X):
        return np.full(X.shape, self.variance)

    def grad_params_diag(self, X):
        return np.stack([np.full(X.shape, self.variance), np.zeros(X.shape)])

    def to_dict(self):
        return {"type": self.type_name, "variance": self.variance, "lengthscale": self.lengthscale}


@dataclass(frozen=True)
class SquaredExponential(_Stationary):
    """sigma^2 exp(-(x - x')^2 / (2 l^2))."""

    type_name = "squared_exponential"

    def _K(self, X, X2):
        d = X[:, None] - X2[None, :]
        return self.variance * np.exp(-0.5 * (d / self.lengthscale) ** 2)

    def grad_params(self, X, X2):
        d = X[:, None] - X2[None, :]
        k = self.variance * np.exp(-0.5 * (d / self.lengthscale) ** 2)
        return np.stack([k, k * (d / self.lengthscale) ** 2])

    def grad_x2(self, X, X2):
        d = X[:, None] - X2[None, :]
        k = self.variance * np.exp(-0.5 * (d / self.lengthscale) ** 2)
        return k * d / self.lengthscale**2


@dataclass(frozen=True)
class Matern32(_Stationary):
    """sigma^2 (1 + sqrt(3) r / l) exp(-sqrt(3) r / l)."""

    type_name = "matern32"

    def _K(self, X, X2):
        u = _SQRT3 * np.abs(X[:, None] - X2[None, :]) / self.lengthscale
        return self.variance * (1.0 + u) * np.exp(-u)

    def grad_params(self, X, X2):
        u = _SQRT3 * np.abs(X[:, None] - X2[None, :]) / self.lengthscale
        e = np.exp(-u)
        return np.stack([self.variance * (1.0 + u) * e, self.variance * u * u * e])

    def grad_x2(self, X, X2):
        d = X[:, None] - X2[None, :]
        u = _SQRT3 * np.abs(d) / self.lengthscale
        return 3.0 * self.variance * d * np.exp(-u) / self.lengthscale**2


@dataclass(frozen=True)
class Linear(Kernel):
    """v x x' (no offset)."""

    variance: float = 1.0
    type_name = "linear"

    def __post_init__(self):
        object.__setattr__(self, "variance", _positive("variance", self.variance))

    def log_params(self):
        return np.log([self.variance])

    def with_log_params(self, theta):
        return Linear(variance=float(np.exp(np.asarray(theta, dtype=float)[0])))

    def _K(self, X, X2):
        return self.variance * np.outer(X, X2)

    def _Kdiag(self, X):
        return self.variance * X * X

    def grad_params(self, X, X2):
        return self._K(X, X2)[None]

    def grad_params_diag(self, X):
        return self._Kdiag(X)[None]

    def grad_x2(self, X, X2):
        return self.variance * np.repeat(X[:, None], X2.size, axis=1)

    def to_dict(self):
        return {"type": self.type_name, "variance": self.variance}


@dataclass(frozen=True)
class Sum(Kernel):
    parts: tuple

    type_name = "sum"

    def __post_init__(self):
        flat = []
        for p in self.parts:
            if not isinstance(p, Kernel):
                raise ValidationError(f"Sum member {p!r} is not a kernel")
            flat.extend(p.parts if isinstance(p, Sum) else [p])
        if len(flat) < 2:
            raise ValidationError("Sum needs at least two member kernels")
        object.__setattr__(self, "parts", tuple(flat))

    @classmethod
    def of(cls, *parts):
        return cls(tuple(parts))

    def log_params(self):
        return np.concatenate([p.log_params() for p in self.parts])

    def with_log_params(self, theta):
        theta = np.asarray(theta, dtype=float)
        out, i = [], 0
        for p in self.parts:
            n = p.n_params
            out.append(p.with_log_params(theta[i:i + n]))
            i += n
        return Sum(tuple(out))

    def _K(self, X, X2):
        return sum(p._K(X, X2) for p in self.parts)

    def _Kdiag(self, X):
        return sum(p._Kdiag(X) for p in self.parts)

    def grad_params(self, X, X2):
        return np.concatenate([p.grad_params(X, X2) for p in self.parts])

    def grad_params_diag(self, X):
        return np.concatenate([p.grad_params_diag(X) for p in self.parts])

    def grad_x2(self, X, X2):
        return sum(p.grad_x2(X, X2) for p in self.parts)

    def to_dict(self):
        return {"type": "sum", "parts": [p.to_dict() for p in self.parts]}


_BY_NAME = {
    "squared_exponential": SquaredExponential,
    "se": SquaredExponential,
    "rbf": SquaredExponential,
    "matern32": Matern32,
    "linear": Linear,
}


def kernel_from_dict(d) -> Kernel:
    """Build a kernel from its config form, e.g. ``{"type": "matern32", "variance": 1.0, "lengthscale": 0.2}``."""
    if not isinstance(d, dict) or "type" not in d:
        raise ValidationError(f"kernel config must be an object with a 'type' key, got {d!r}")
    kind = str(d["type"]).lower()
    if kind == "sum":
        return Sum(tuple(kernel_from_dict(p) for p in d.get("parts", [])))
    if kind not in _BY_NAME:
        raise ValidationError(f"unknown kernel type {d['type']!r}")
    cls = _BY_NAME[kind]
    kwargs = {k: v for k, v in d.items() if k != "type"}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for {kind} kernel: {exc}") from None


def default_kernel() -> Kernel:
    return Sum.of(Matern32(variance=1.0, lengthscale=0.2), Linear(variance=0.1))


def kernel_eval(spec: Kernel, x: float, x2: float) -> float:
    return float(spec.K([x], [x2])[0, 0])


def kernel_matrix(spec: Kernel, X: Sequence[float], X2: Sequence[float] | None = None, diag_only=False):
    """Covariance block between ``X`` and ``X2``; the diagonal only if ``diag_only``."""
    X = _as_inputs(X)
    X2 = X if X2 is None else _as_inputs(X2, "X2")
    if diag_only:
        n = min(X.size, X2.size)
        if X2 is X or np.array_equal(X[:n], X2[:n]):
            return spec._Kdiag(X[:n])
        return np.einsum("ii->i", spec._K(X[:n], X2[:n])).copy()
    return spec._K(X, X2)
