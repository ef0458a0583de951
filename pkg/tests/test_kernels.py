import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boundgp.errors import ValidationError
from boundgp.kernels import (
    Linear,
    Matern32,
    SquaredExponential,
    Sum,
    default_kernel,
    kernel_eval,
    kernel_from_dict,
    kernel_matrix,
)

pos = st.floats(0.05, 5.0)
xs = st.floats(-3.0, 3.0)


def test_se_zero_lag_is_signal_variance():
    assert kernel_eval(SquaredExponential(2.0, 1.0), 3.0, 3.0) == 2.0


def test_se_unit_lag():
    assert kernel_eval(SquaredExponential(1.0, 1.0), 0.0, 1.0) == pytest.approx(math.exp(-0.5), abs=1e-15)


def test_linear_value():
    assert kernel_eval(Linear(0.5), 2.0, 3.0) == pytest.approx(3.0, abs=1e-15)


def test_matern32_closed_form():
    k = Matern32(1.5, 0.4)
    r = 0.3
    s = math.sqrt(3.0) * r / 0.4
    assert kernel_eval(k, 0.1, 0.4) == pytest.approx(1.5 * (1 + s) * math.exp(-s), rel=1e-14)


def test_matrix_examples():
    np.testing.assert_array_equal(kernel_matrix(Matern32(1.0, 0.3), [0.0]), [[1.0]])
    K = kernel_matrix(SquaredExponential(1.0, 1.0), [0.0, 1.0])
    np.testing.assert_allclose(K, [[1, 0.60653066], [0.60653066, 1]], atol=1e-8)
    np.testing.assert_array_equal(kernel_matrix(SquaredExponential(3.0, 1.0), [0, 1, 2], diag_only=True), [3, 3, 3])


def test_rectangular_and_diag_only_length():
    K = kernel_matrix(default_kernel(), [0.0, 0.5, 1.0], [0.2, 0.3])
    assert K.shape == (3, 2)
    assert kernel_matrix(default_kernel(), [0.0, 0.5, 1.0], [0.2, 0.3], diag_only=True).shape == (2,)


def test_non_finite_input_rejected():
    with pytest.raises(ValidationError):
        kernel_matrix(default_kernel(), [0.0, np.nan])
    with pytest.raises(ValidationError):
        kernel_matrix(default_kernel(), [])


@pytest.mark.parametrize("bad", [lambda: SquaredExponential(0.0, 1.0), lambda: Matern32(1.0, -1.0),
                                 lambda: Linear(0.0)])
def test_non_positive_hyperparameters_rejected(bad):
    with pytest.raises(ValidationError):
        bad()


def test_sum_flattens_and_is_associative(rng):
    a, b, c = SquaredExponential(1.0, 0.3), Matern32(0.5, 0.7), Linear(0.2)
    left = (a + b) + c
    right = a + (b + c)
    assert isinstance(left, Sum) and len(left.parts) == 3
    X = rng.uniform(-1, 1, 12)
    np.testing.assert_allclose(left.K(X), right.K(X), rtol=0, atol=1e-14)


def test_sum_linearity(rng):
    a, b = Matern32(1.3, 0.2), Linear(0.7)
    X = rng.uniform(0, 1, 25)
    np.testing.assert_allclose(kernel_matrix(Sum.of(a, b), X), a.K(X) + b.K(X), rtol=0, atol=1e-14)


def test_from_dict_round_trip():
    d = {"type": "sum", "parts": [{"type": "matern32", "variance": 1.0, "lengthscale": 0.2},
                                  {"type": "linear", "variance": 0.1}]}
    k = kernel_from_dict(d)
    assert kernel_from_dict(k.to_dict()).to_dict() == k.to_dict()
    assert k.to_dict() == default_kernel().to_dict()


def test_from_dict_rejects_unknown_type():
    with pytest.raises(ValidationError):
        kernel_from_dict({"type": "periodic", "variance": 1.0})


KERNELS = [SquaredExponential(1.7, 0.4), Matern32(0.8, 0.25), Linear(0.6),
           Sum.of(Matern32(1.0, 0.2), Linear(0.1), SquaredExponential(0.3, 1.1))]


@settings(max_examples=60, deadline=None)
@given(x=xs, y=xs, v=pos, l=pos)
def test_symmetry(x, y, v, l):
    for k in (SquaredExponential(v, l), Matern32(v, l), Linear(v), Sum.of(Matern32(v, l), Linear(v))):
        assert kernel_eval(k, x, y) == kernel_eval(k, y, x)


@pytest.mark.parametrize("k", KERNELS, ids=lambda k: type(k).__name__)
def test_psd(k, rng):
    for n in (5, 20, 50):
        X = rng.uniform(-2, 2, n)
        K = kernel_matrix(k, X)
        assert np.array_equal(K, K.T)
        assert np.linalg.eigvalsh(K).min() >= -1e-8 * np.trace(K)


@pytest.mark.parametrize("k", KERNELS, ids=lambda k: type(k).__name__)
def test_hyperparameter_gradients(k, rng):
    X, X2 = rng.uniform(-1, 1, 7), rng.uniform(-1, 1, 5)
    theta = k.log_params()
    G = k.grad_params(X, X2)
    h = 1e-6
    for p in range(theta.size):
        e = np.zeros_like(theta)
        e[p] = h
        fd = (k.with_log_params(theta + e).K(X, X2) - k.with_log_params(theta - e).K(X, X2)) / (2 * h)
        np.testing.assert_allclose(G[p], fd, rtol=1e-5, atol=1e-9)


@pytest.mark.parametrize("k", KERNELS, ids=lambda k: type(k).__name__)
def test_input_gradient(k, rng):
    X, X2 = rng.uniform(-1, 1, 6), rng.uniform(-1, 1, 4)
    D = k.grad_x2(X, X2)
    h = 1e-6
    for j in range(X2.size):
        e = np.zeros_like(X2)
        e[j] = h
        fd = (k.K(X, X2 + e) - k.K(X, X2 - e)) / (2 * h)
        np.testing.assert_allclose(D[:, j], fd[:, j], rtol=1e-5, atol=1e-8)
